import json

import numpy as np
import pytest
from scipy.integrate import trapezoid

from blockcorr import detequiv as de
from blockcorr import mplaw
from blockcorr.errors import DomainError, NoConvergence
from blockcorr.szego import correction_from_coefficients, error_matrix
from blockcorr.tsmodel import CovarianceModel, ModelBank

AR = CovarianceModel.ar1(0.5)
WHITE = CovarianceModel.white()
Z_GRID = [complex(x, y) for x in (-1, 0.5, 2, 4) for y in (0.05, 0.5, 1)]


@pytest.mark.parametrize("z", [1 + 0.5j, -1 + 0.05j, 0.5 + 1j])
def test_white_bank_is_marchenko_pastur(z):
    bank = ModelBank.repeat(WHITE, 3)
    pair = de.solve_canonical(bank, 3, 4, 24, z)
    law = mplaw.MPLaw(0.5)
    t, tt = mplaw.stieltjes_t(law, z), mplaw.stieltjes_t_tilde(law, z)
    assert pair.iterations == 1 and pair.residual <= 1e-12
    np.testing.assert_allclose(pair.T, t * np.eye(12), atol=1e-12)
    np.testing.assert_allclose(pair.T_tilde, tt * np.eye(24), atol=1e-12)
    assert de.trace_stieltjes(pair) == pytest.approx(t, abs=1e-14)


@pytest.mark.parametrize("bank", [ModelBank.repeat(AR, 4), ModelBank([AR, WHITE, CovarianceModel.ar1(0.3j)])])
def test_large_imaginary_axis(bank):
    y = 1e3
    pair = de.solve_canonical(bank, bank.M, 3, 20, 1j * y)
    s = de.trace_stieltjes(pair)
    assert -1j * y * s == pytest.approx(1, abs=1e-3)
    # first moment of mu_N is 1
    assert (-1j * y * (1 + 1j * y * s)).real == pytest.approx(1, abs=1e-2)


def test_canonical_residual_ar1():
    bank = ModelBank.repeat(AR, 8)
    pair = de.solve_canonical(bank, 8, 4, 64, 1 + 0.5j)
    r1, r2 = de.canonical_residuals(pair)
    assert max(r1, r2) <= 1e-9
    assert pair.residual <= 10 * de.DEFAULT_TOL


def test_residual_equations_checked_on_full_matrices():
    # Recompute both right-hand sides from dense operators, without the grouped solver internals.
    from blockcorr.matfun import inv_sqrt
    from blockcorr.toeplitz import psi_bar, psi_block
    from blockcorr.tsmodel import toeplitz_covariance
    from scipy.linalg import block_diag

    bank = ModelBank([AR, CovarianceModel.ar1(-0.4 + 0.2j), AR])
    M, L, N, z = 3, 3, 12, 0.7 + 0.3j
    pair = de.solve_canonical(bank, M, L, N, z, tol=1e-13, max_iter=5000)
    Bm12 = block_diag(*[inv_sqrt(toeplitz_covariance(m, L)) for m in bank])
    c = M * L / N
    T, Tt = pair.T, pair.T_tilde
    rhs_T = -np.linalg.inv(np.eye(M * L) + Bm12 @ psi_block(bank, Tt.T, L).matrix @ Bm12) / z
    rhs_Tt = -np.linalg.inv(np.eye(N) + c * psi_bar(bank, Bm12 @ T @ Bm12, N).T) / z
    assert np.linalg.norm(T - rhs_T) / np.linalg.norm(T) <= 1e-11
    assert np.linalg.norm(Tt - rhs_Tt) / np.linalg.norm(Tt) <= 1e-11


def test_trace_matches_dense_block_sum():
    bank = ModelBank([AR, AR, WHITE])
    pair = de.solve_canonical(bank, 3, 4, 30, 2 + 0.2j)
    assert de.trace_stieltjes(pair) == pytest.approx(np.trace(pair.T) / 12, abs=1e-14)
    assert de.trace_stieltjes(pair).imag >= 0


@pytest.mark.parametrize("z", Z_GRID)
def test_stieltjes_class(z):
    pair = de.solve_canonical(ModelBank.repeat(AR, 8), 8, 4, 64, z, max_iter=5000)
    for d in de.stieltjes_class_defects(pair).values():
        assert d["im_min"] >= -1e-10 and d["imz_min"] >= -1e-10 and d["norm_excess"] <= 1e-10
    # uniform lower bound on the smallest singular value of T
    smin = min(np.linalg.svd(b, compute_uv=False).min() for b in pair.T_blocks)
    assert smin >= z.imag / (4 * (4 + abs(z) ** 2))


def test_domain_and_convergence_errors():
    bank = ModelBank.repeat(AR, 2)
    with pytest.raises(DomainError):
        de.solve_canonical(bank, 2, 3, 12, 1.0)
    with pytest.raises(NoConvergence) as info:
        de.solve_canonical(bank, 2, 3, 12, 0.5 + 0.01j, max_iter=2)
    assert "2 iterations" in str(info.value)
    with pytest.raises(ValueError):
        de.solve_canonical(bank, 3, 3, 12, 1j)


def test_damping_reaches_the_same_pair():
    bank = ModelBank.repeat(AR, 4)
    a = de.solve_canonical(bank, 4, 4, 32, 1 + 0.2j, tol=1e-12, max_iter=5000)
    b = de.solve_canonical(bank, 4, 4, 32, 1 + 0.2j, tol=1e-12, max_iter=5000, damping=0.7)
    np.testing.assert_allclose(a.T, b.T, atol=1e-9)


def test_gap_to_mp_shrinks_with_L():
    zs = [complex(x, y) for x in (-1, 0.5, 2, 4) for y in (0.1, 0.5, 1)]
    law = mplaw.MPLaw(1.0)
    gaps = []
    for L in (8, 16, 32, 64):
        bank = ModelBank.repeat(AR, 4)
        gaps.append(max(abs(de.trace_stieltjes(de.solve_canonical(bank, 4, L, 4 * L, z, max_iter=5000))
                            - mplaw.stieltjes_t(law, z)) for z in zs))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_density_white_matches_smoothed_mp():
    x = np.linspace(-0.5, 3.5, 40)
    d = de.density_mu_N(ModelBank.repeat(WHITE, 2), 2, 4, 16, x, 0.05)
    ref = np.imag(mplaw.stieltjes_t(mplaw.MPLaw(0.5), x + 0.05j)) / np.pi
    np.testing.assert_allclose(d, ref, atol=1e-9)


def test_density_conserves_mass():
    x = np.arange(-0.5, 4.0, 0.02)
    d = de.density_mu_N(ModelBank.repeat(AR, 4), 4, 2, 16, x, 1e-3, max_iter=20000)
    assert np.all(d >= 0)
    assert trapezoid(d, x) == pytest.approx(1, abs=0.02)


def test_sq_dev_white():
    value, corr, corr_psi = de.sq_dev_integral(ModelBank.repeat(WHITE, 5), 5, 4, 40)
    assert value == 0.5 and corr == 0 and corr_psi == 0


def test_sq_dev_ar1_histogram_dims():
    bank = ModelBank.repeat(AR, 80)
    M, L, N = 80, 10, 600
    value, corr, corr_psi = de.sq_dev_integral(bank, M, L, N)
    c = M * L / N
    rep = error_matrix(bank, L, N)
    assert corr > 0
    assert corr == pytest.approx(c * correction_from_coefficients(rep.eps_bar, N), rel=1e-10)
    assert corr_psi == pytest.approx(corr, abs=1e-8)
    assert value == pytest.approx(c + corr, abs=1e-12)


def test_sq_dev_matches_contour_moments():
    # independent route: second moment of mu_N from the solver itself
    bank = ModelBank([AR, CovarianceModel.ar1(0.3 + 0.3j), AR, WHITE])
    M, L, N = 4, 4, 32
    m0, m1, m2 = de.contour_moments(bank, M, L, N)
    value, _, _ = de.sq_dev_integral(bank, M, L, N)
    assert m0 == pytest.approx(1, abs=1e-10)
    assert m1 == pytest.approx(1, abs=1e-10)
    assert m2 - 2 * m1 + m0 == pytest.approx(value, abs=1e-9)


def test_correction_decays_with_L():
    corr = []
    for L in (8, 16, 32, 64):
        M, N = 16, 32 * L  # c fixed at 0.5
        corr.append(de.sq_dev_integral(ModelBank.repeat(AR, M), M, L, N)[1])
    for a, b in zip(corr, corr[2:]):
        assert b <= a / 2


def test_report_roundtrip(tmp_path):
    bank = ModelBank.repeat(AR, 4)
    rep = de.detequiv_report(bank, 4, 32, z_grid=np.array([1 + 1j, -1 + 0.5j]))
    d = json.loads(rep.to_json())
    assert d["dims"] == [4, 32, 4]
    assert rep.sq_dev_integral == pytest.approx(rep.mp_sq_dev + rep.correction, abs=1e-10)
    assert np.all(rep.gap >= 0)
    path = tmp_path / "density.csv"
    de.write_density_csv(path, [0.0, 1.0], [0.1, 0.2], [0.3, 0.4])
    assert path.read_text().splitlines()[0] == "x,density_muN,density_mp"


def test_default_report_grid():
    g = de.default_z_grid(0.5)
    assert set(np.round(g.imag, 12)) == {0.01, 0.1, 1.0}
    assert g.real.min() == -1 and g.real.max() == pytest.approx(mplaw.MPLaw(0.5).lam_plus + 1)
