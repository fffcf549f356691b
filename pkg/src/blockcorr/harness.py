"""Monte-Carlo experiments: eigenvalue histograms against MP, the error decomposition
versus beta, the exact-mean identity and a rate table.

Every replication draws from its own RNG stream keyed by ``(seed, rep, m)``, and
results are folded in replication order, so outputs do not depend on the number
of worker threads.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from . import mplaw
from .detequiv import sq_dev_integral
from .errors import DomainError, SingularBlockError
from .sampling import (
    eigen_stats,
    histogram,
    oracle_block_corr,
    sample_block_corr,
    sample_cov,
    sq_dev_trace,
    true_inv_sqrt_blocks,
    write_histogram_csv,
)
from .tsmodel import CovarianceModel, ModelBank, sample_ensemble

ATOM_TOL = 1e-8


def round_half_away(x):
    """Integer closest to x, halves rounded away from zero."""
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def protocol_dims(c_star, N, beta):
    """``M = [(c* N)^{1 - beta}]`` and ``L = [(c* N)^beta]``."""
    base = c_star * N
    return round_half_away(base ** (1 - beta)), round_half_away(base ** beta)


def _model_from(rho):
    return CovarianceModel.white() if rho == 0 else CovarianceModel.ar1(rho)


def _pmap(fn, items, threads=1):
    items = list(items)
    if threads is None or threads <= 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def content_hash(obj):
    """SHA-256 of the canonical JSON encoding of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default)
    return hashlib.sha256(text.encode()).hexdigest()


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot encode {type(o).__name__}")


def write_manifest(outdir, kind, config, results):
    """Write ``manifest.json`` with the resolved config, its hash and the results."""
    os.makedirs(outdir, exist_ok=True)
    doc = {
        "experiment": kind,
        "package_version": __version__,
        "config": config,
        "config_hash": content_hash({"experiment": kind, "config": config}),
        "results": results,
    }
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


@dataclass
class ExperimentConfig:
    """Configuration of the beta sweep of the error decomposition."""

    c_star: float = 0.5
    N_list: list = field(default_factory=lambda: [600])
    beta_list: list = field(default_factory=lambda: [0.2, 0.3, 0.4, 0.5, 0.6, 0.7])
    rho: complex = 0.5
    reps: int = 200
    seed: int = 0
    statistic: str = "sq_dev"
    outputs: str | None = None

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.c_star > 0:
            raise ValueError("c_star must be positive")
        for b in self.beta_list:
            if not 0 < b < 1:
                raise ValueError(f"beta must lie in (0, 1), got {b}")
        if self.statistic != "sq_dev":
            raise DomainError("error curves need a closed form for int phi dmu_N; only 'sq_dev' has one")

    def cells(self):
        """(N, beta, M, L) for every admissible grid cell; cells with M < 2 or L < 1 are skipped."""
        out = []
        for N in self.N_list:
            for beta in self.beta_list:
                M, L = protocol_dims(self.c_star, N, beta)
                if M < 2 or L < 1:
                    warnings.warn(f"skipping N={N}, beta={beta}: M={M}, L={L}")
                    continue
                out.append((int(N), float(beta), M, L))
        return out

    def to_dict(self):
        d = asdict(self)
        d["rho"] = [complex(self.rho).real, complex(self.rho).imag]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if isinstance(d.get("rho"), (list, tuple)):
            d["rho"] = complex(*d["rho"])
        return cls(**d)


@dataclass
class ErrorCell:
    N: int
    beta: float
    M: int
    L: int
    err_total: float
    err1: float
    err2: float
    stderr1: float
    reps_used: int
    dropped: int


@dataclass
class ErrorCurves:
    """Error decomposition per (N, beta) cell."""

    cells: list

    def for_N(self, N):
        return sorted((c for c in self.cells if c.N == N), key=lambda c: c.beta)

    def to_dict(self):
        return {"cells": [asdict(c) for c in self.cells]}

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["beta", "N", "M", "L", "err_total", "err1", "err2", "stderr1"])
            for c in self.cells:
                w.writerow([repr(c.beta), c.N, c.M, c.L, repr(c.err_total), repr(c.err1),
                            repr(c.err2), repr(c.stderr1)])


def _replicate(bank, N, L, seed, rep, statistic="sq_dev"):
    """phi-hat on the sample block correlation matrix for one replication, or None if dropped."""
    ens = sample_ensemble(bank, N, L, seed, rep=rep)
    try:
        R = sample_block_corr(ens)
    except SingularBlockError:
        return None
    if statistic == "sq_dev":
        return sq_dev_trace(R)
    return eigen_stats(R, (statistic,)).lss[statistic]


def run_error_cell(model, N, beta, M, L, reps, seed, threads=1):
    """One (N, beta) cell of the error decomposition for the sq_dev statistic."""
    bank = ModelBank.repeat(model, M)
    c = M * L / N
    mu_N, _, _ = sq_dev_integral(bank, M, L, N)
    # distinct cells get distinct streams through the seed key
    cell_seed = [seed, N, M, L]
    vals = _pmap(lambda r: _replicate(bank, N, L, cell_seed, r), range(reps), threads)
    phi = np.array([v for v in vals if v is not None])
    dropped = reps - phi.size
    if phi.size == 0:
        raise SingularBlockError(f"every replication was dropped at N={N}, beta={beta}")
    d1 = (phi - mu_N) ** 2
    err1 = float(np.sqrt(d1.mean()))
    err_total = float(np.sqrt(np.mean((phi - c) ** 2)))
    if phi.size > 1 and err1 > 0:
        stderr1 = float(d1.std(ddof=1) / np.sqrt(phi.size) / (2 * err1))
    else:
        stderr1 = float("inf")
    return ErrorCell(N, beta, M, L, err_total, err1, float(abs(mu_N - c)), stderr1, int(phi.size), int(dropped))


def run_error_curves(config, threads=1):
    """Error decomposition over the (N, beta) grid of ``config``."""
    model = _model_from(config.rho)
    cells = [run_error_cell(model, N, beta, M, L, config.reps, config.seed, threads)
             for N, beta, M, L in config.cells()]
    curves = ErrorCurves(cells)
    if config.outputs:
        os.makedirs(config.outputs, exist_ok=True)
        for N in sorted({c.N for c in cells}):
            ErrorCurves(curves.for_N(N)).write_csv(os.path.join(config.outputs, f"fig2_N{N}.csv"))
        write_manifest(config.outputs, "error-curves", config.to_dict(), curves.to_dict())
    return curves


@dataclass
class Crossover:
    beta: float
    bracket: tuple


def crossover_estimate(curves, N=None):
    """beta where err1 and err2 cross, by linear interpolation of ``log err1 - log err2``.

    Returns ``None`` when the curves do not cross on the grid (e.g. err2 == 0).
    Accepts an ``ErrorCurves`` or a tuple ``(betas, err1, err2)``.
    """
    if isinstance(curves, ErrorCurves):
        cells = curves.for_N(N if N is not None else curves.cells[0].N)
        betas = np.array([c.beta for c in cells])
        e1 = np.array([c.err1 for c in cells])
        e2 = np.array([c.err2 for c in cells])
    else:
        betas, e1, e2 = (np.asarray(v, dtype=float) for v in curves)
    if np.any(e2 <= 0) or np.any(e1 <= 0):
        return None
    g = np.log(e1) - np.log(e2)
    for i in range(len(g) - 1):
        if g[i] == 0:
            return Crossover(float(betas[i]), (float(betas[i]), float(betas[i])))
        if g[i] * g[i + 1] < 0:
            b = betas[i] + (betas[i + 1] - betas[i]) * g[i] / (g[i] - g[i + 1])
            return Crossover(float(b), (float(betas[i]), float(betas[i + 1])))
    if g[-1] == 0:
        return Crossover(float(betas[-1]), (float(betas[-1]), float(betas[-1])))
    return None


def ks_distance(eigs, law, atom_tol=ATOM_TOL):
    """Kolmogorov-Smirnov sup distance between pooled eigenvalues and the MP CDF.

    Eigenvalues below ``atom_tol`` in magnitude are treated as exact zeros so that
    the atom at 0 (c > 1) is matched.
    """
    x = np.sort(np.where(np.abs(eigs) < atom_tol, 0.0, np.asarray(eigs, dtype=float)))
    n = x.size
    xs, idx = np.unique(x, return_index=True)
    last = np.r_[idx[1:], n]             # ECDF after each distinct value is last/n
    F = mplaw.cdf(law, xs)
    F_left = F - np.where(xs == 0, law.atom_mass, 0.0)
    d_plus = np.max(last / n - F)
    d_minus = np.max(F_left - idx / n)
    return float(max(d_plus, d_minus))


@dataclass
class HistogramResult:
    dims: tuple
    c: float
    eigenvalues: np.ndarray = field(repr=False)
    bin_left: np.ndarray = field(repr=False)
    bin_right: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)
    mp_density: np.ndarray = field(repr=False)
    ks: float = 0.0
    dropped: int = 0

    def to_dict(self):
        return {"dims": list(self.dims), "c": self.c, "ks": self.ks, "dropped": self.dropped,
                "n_eigenvalues": int(self.eigenvalues.size), "atom_mass": mplaw.MPLaw(self.c).atom_mass}

    def write_csv(self, path):
        write_histogram_csv(path, self.bin_left, self.bin_right, self.density,
                            extra={"mp_density": self.mp_density})


def run_histogram(M, N, L, rho=0.5, reps=20, bins=None, seed=0, threads=1, outputs=None, tag=None):
    """Pooled eigenvalues of the sample block correlation matrix over ``reps`` replications.

    ``mp_density`` is the absolutely continuous MP density at bin centres; the atom
    at 0 (when ``c > 1``) shows up only in the KS distance and the manifest.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    bank = ModelBank.repeat(_model_from(rho), M)

    def one(r):
        ens = sample_ensemble(bank, N, L, seed, rep=r)
        try:
            return eigen_stats(sample_block_corr(ens), ()).eigenvalues
        except SingularBlockError:
            return None

    runs = _pmap(one, range(reps), threads)
    kept = [e for e in runs if e is not None]
    if not kept:
        raise SingularBlockError("every replication was dropped")
    eigs = np.concatenate(kept)
    law = mplaw.MPLaw(M * L / N)
    left, right, dens = histogram(eigs, bins=bins)
    res = HistogramResult(
        dims=(M, N, L), c=law.c, eigenvalues=eigs, bin_left=left, bin_right=right, density=dens,
        mp_density=mplaw.density(law, 0.5 * (left + right)), ks=ks_distance(eigs, law),
        dropped=reps - len(kept),
    )
    if outputs:
        os.makedirs(outputs, exist_ok=True)
        tag = tag or f"M{M}_N{N}_L{L}"
        res.write_csv(os.path.join(outputs, f"fig1_{tag}.csv"))
        cfg = {"M": M, "N": N, "L": L, "rho": complex(rho), "reps": reps, "bins": bins, "seed": seed}
        write_manifest(outputs, "histogram", cfg, res.to_dict())
    return res


@dataclass
class MeanIdentityReport:
    dims: tuple
    reps: int
    mc_mean: float
    stderr: float
    exact: float
    mp_value: float
    correction: float
    z_score: float
    single_rep: bool

    def to_dict(self):
        return asdict(self)


def run_mean_identity(M, L, N, rho=0.5, reps=2000, seed=0, threads=1):
    """Monte-Carlo mean of ``(1/ML) ||R-bar_corr - I||_F^2`` against ``c + correction``.

    With ``reps == 1`` the standard error is undefined: it is reported as ``inf``,
    the z-score as 0 and ``single_rep`` is set.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    bank = ModelBank.repeat(_model_from(rho), M)
    inv_sqrts = true_inv_sqrt_blocks(bank, L)

    def one(r):
        ens = sample_ensemble(bank, N, L, seed, rep=r)
        return sq_dev_trace(oracle_block_corr(ens, bank, sample_cov(ens), inv_sqrts))

    vals = np.array(_pmap(one, range(reps), threads))
    exact, correction, _ = sq_dev_integral(bank, M, L, N)
    mean = float(vals.mean())
    if reps > 1:
        se = float(vals.std(ddof=1) / np.sqrt(reps))
        z = (mean - exact) / se if se > 0 else 0.0
    else:
        se, z = float("inf"), 0.0
    return MeanIdentityReport((M, N, L), reps, mean, se, exact, M * L / N, correction, float(z), reps == 1)


def rate_table(L, M_list, c=0.5, rho=0.5, reps=50, seed=0, threads=1):
    """RMS of ``phi-hat_N - phi-bar_N`` (sample vs true normalization) against M at fixed L.

    Returns rows ``(M, N, rms)`` and the least-squares slope of log rms on log M.
    """
    rows = []
    model = _model_from(rho)
    for M in M_list:
        N = round_half_away(M * L / c)
        bank = ModelBank.repeat(model, M)
        inv_sqrts = true_inv_sqrt_blocks(bank, L)

        def one(r, bank=bank, N=N, inv_sqrts=inv_sqrts):
            ens = sample_ensemble(bank, N, L, [seed, M], rep=r)
            R = sample_cov(ens)
            return sq_dev_trace(sample_block_corr(ens, R)) - sq_dev_trace(oracle_block_corr(ens, bank, R, inv_sqrts))

        d = np.array(_pmap(one, range(reps), threads))
        rows.append((M, N, float(np.sqrt(np.mean(d ** 2)))))
    lm = np.log([r[0] for r in rows])
    lr = np.log([r[2] for r in rows])
    slope = float(np.polyfit(lm, lr, 1)[0]) if len(rows) > 1 else float("nan")
    return rows, slope
