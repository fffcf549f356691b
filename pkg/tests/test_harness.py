import csv
import json

import numpy as np
import pytest

from blockcorr import harness as hz
from blockcorr import mplaw
from blockcorr.errors import DomainError
from blockcorr.tsmodel import CovarianceModel


@pytest.mark.parametrize("x,n", [(0.5, 1), (1.5, 2), (2.5, 3), (-0.5, -1), (2.49, 2), (300 ** 0.5, 17)])
def test_round_half_away(x, n):
    assert hz.round_half_away(x) == n


def test_protocol_dims():
    assert hz.protocol_dims(0.5, 600, 0.2) == (96, 3)
    assert hz.protocol_dims(0.5, 600, 0.5) == (17, 17)
    M, L = hz.protocol_dims(0.5, 600, 0.7)
    assert (M, L) == (6, 54)


def test_config_validation_and_roundtrip():
    with pytest.raises(ValueError):
        hz.ExperimentConfig(reps=0)
    with pytest.raises(ValueError):
        hz.ExperimentConfig(beta_list=[0.3, 1.0])
    with pytest.raises(DomainError):
        hz.ExperimentConfig(statistic="log")
    cfg = hz.ExperimentConfig(rho=0.3 + 0.1j, N_list=[100, 200])
    assert hz.ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ValueError):
        hz.ExperimentConfig.from_dict({"reps": 3, "bogus": 1})


def test_degenerate_cells_are_skipped():
    cfg = hz.ExperimentConfig(c_star=0.5, N_list=[8], beta_list=[0.2, 0.99])
    with pytest.warns(UserWarning):
        cells = cfg.cells()
    assert all(M >= 2 for _, _, M, _ in cells)


def test_white_error_cell_has_no_bias():
    cell = hz.run_error_cell(CovarianceModel.white(), 80, 0.5, 4, 5, reps=20, seed=1)
    assert cell.err2 == 0
    # phi-bar reference is then c itself, so the two errors coincide
    assert cell.err1 == pytest.approx(cell.err_total, rel=1e-12)
    assert cell.reps_used == 20 and cell.dropped == 0


def test_error_triangle_inequality():
    cell = hz.run_error_cell(CovarianceModel.ar1(0.5), 120, 0.5, 8, 8, reps=15, seed=2)
    assert cell.err_total <= cell.err1 + cell.err2 + 1e-12
    assert cell.err_total ** 2 <= 2 * (cell.err1 ** 2 + cell.err2 ** 2) + 1e-12


def test_crossover_on_synthetic_curves():
    betas = np.array([0.2, 0.3, 0.4, 0.5])
    # log e1 - log e2 is linear in beta and vanishes at 1/3
    e1 = np.exp(3 * betas)
    e2 = np.exp(1.0 - 0 * betas)
    est = hz.crossover_estimate((betas, e1, e2))
    assert est.beta == pytest.approx(1 / 3, abs=1e-12)
    assert est.bracket == (0.3, 0.4)
    assert hz.crossover_estimate((betas, e1, np.zeros(4))) is None
    assert hz.crossover_estimate((betas, e1, e1 / 2)) is None


def test_ks_white_single_lag():
    res = hz.run_histogram(40, 200, 1, rho=0, reps=5, seed=3)
    assert res.ks < 0.05


def test_ks_distance_exact_cases():
    law = mplaw.MPLaw(2.0)
    # half exact zeros, half at the top edge: the atom matches, the bulk is off
    eigs = np.r_[np.full(50, 1e-12), np.full(50, law.lam_plus)]
    assert hz.ks_distance(eigs, law) == pytest.approx(0.5, abs=1e-9)
    grid = np.linspace(0, 1, 10001)[1:-1]
    q = np.interp(grid, mplaw.cdf(mplaw.MPLaw(0.5), np.linspace(0.08, 2.92, 4001)), np.linspace(0.08, 2.92, 4001))
    assert hz.ks_distance(q, mplaw.MPLaw(0.5)) < 2e-3


def test_histogram_outputs(tmp_path):
    res = hz.run_histogram(6, 60, 3, reps=3, seed=4, outputs=tmp_path, tag="small")
    rows = list(csv.reader(open(tmp_path / "fig1_small.csv")))
    assert "mp_density" in rows[0] and len(rows) > 2
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["experiment"] == "histogram" and man["results"]["ks"] == res.ks
    assert res.eigenvalues.size == 3 * 18


def test_curves_are_thread_count_invariant(tmp_path):
    cfg = dict(c_star=0.5, N_list=[60], beta_list=[0.3, 0.6], rho=0.5, reps=6, seed=5)
    a = hz.run_error_curves(hz.ExperimentConfig(outputs=str(tmp_path / "a"), **cfg), threads=1)
    b = hz.run_error_curves(hz.ExperimentConfig(outputs=str(tmp_path / "b"), **cfg), threads=4)
    assert a == b
    assert (tmp_path / "a" / "fig2_N60.csv").read_bytes() == (tmp_path / "b" / "fig2_N60.csv").read_bytes()
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma["results"] == mb["results"]
    assert ma["config"]["reps"] == 6 and len(ma["config_hash"]) == 64


def test_cells_use_distinct_streams():
    model = CovarianceModel.ar1(0.5)
    a = hz.run_error_cell(model, 60, 0.3, 4, 4, reps=4, seed=0)
    b = hz.run_error_cell(model, 64, 0.3, 4, 4, reps=4, seed=0)
    assert a.err1 != b.err1


def test_mean_identity_small():
    rep = hz.run_mean_identity(4, 4, 64, reps=200, seed=6, threads=2)
    assert abs(rep.z_score) < 4
    assert rep.exact == pytest.approx(rep.mp_value + rep.correction)
    single = hz.run_mean_identity(4, 4, 64, reps=1, seed=6)
    assert single.single_rep and single.stderr == float("inf") and single.z_score == 0


def test_rate_table_shape():
    rows, slope = hz.rate_table(4, [4, 8], reps=5, seed=7)
    assert [(M, N) for M, N, _ in rows] == [(4, 32), (8, 64)]
    assert all(r > 0 for _, _, r in rows) and np.isfinite(slope)


def test_content_hash_is_order_free():
    assert hz.content_hash({"a": 1, "b": [1, 2]}) == hz.content_hash({"b": [1, 2], "a": 1})
