"""Sample block covariance and block correlation matrices, and their spectral statistics."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockHermitian, bdiag, hermitize
from .errors import DomainError, SingularBlockError
from .matfun import inv_sqrt
from .toeplitz import toeplitz_from_coeffs
from .tsmodel import spectral_density, toeplitz_covariance

COND_MAX = 1e12
EIG_FLOOR = 1e-12


def _sq_dev(lam):
    return (lam - 1.0) ** 2


def _logdet(lam):
    if np.any(lam <= 0):
        raise DomainError("logdet needs strictly positive eigenvalues")
    return np.log(lam)


def _mean(lam):
    return lam


STATISTICS = {"sq_dev": _sq_dev, "logdet": _logdet, "mean": _mean}


@dataclass
class SpectralStats:
    """Sorted eigenvalues of an ML x ML matrix and linear spectral statistics."""

    eigenvalues: np.ndarray = field(repr=False)
    lss: dict
    dims: tuple

    def to_dict(self):
        return {"dims": list(self.dims), "eigenvalues": [float(v) for v in self.eigenvalues],
                "lss": {k: float(v) for k, v in self.lss.items()}}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(np.asarray(d["eigenvalues"], dtype=float), dict(d["lss"]), tuple(d["dims"]))


def build_W(ens):
    """``ML x N`` matrix whose column n stacks the lag vectors ``y_{m,n}^L`` over m, scaled by ``1/sqrt(N)``."""
    M, N, L = ens.dims
    # windows[m, n, k] = y[m, n + k]
    windows = np.lib.stride_tricks.sliding_window_view(ens.data, L, axis=1)[:, :N, :]
    W = windows.transpose(0, 2, 1).reshape(M * L, N)
    return W / np.sqrt(N)


def build_W_time_major(ens):
    """Row-permuted layout: block row k holds ``(y_{n+k})_n`` with all M series stacked."""
    M, N, L = ens.dims
    windows = np.lib.stride_tricks.sliding_window_view(ens.data, L, axis=1)[:, :N, :]
    W = windows.transpose(2, 0, 1).reshape(L * M, N)
    return W / np.sqrt(N)


def sample_cov(ens):
    """Sample spatio-temporal covariance ``R^_L = W W^H``."""
    W = build_W(ens)
    return BlockHermitian(hermitize(W @ W.conj().T), ens.M, ens.L)


def block_diag(B):
    """Bdiag: keep the L x L diagonal blocks only."""
    return bdiag(B, B.L)


def _inv_sqrt_blocks(blocks, check=True):
    out = []
    for m, blk in enumerate(blocks):
        w = np.linalg.eigvalsh(blk)
        if check and (w[0] <= 0 or w[-1] / w[0] > COND_MAX):
            cond = np.inf if w[0] <= 0 else w[-1] / w[0]
            raise SingularBlockError(f"diagonal block {m} has condition number {cond:.3e} > {COND_MAX:.0e}")
        out.append(inv_sqrt(blk))
    return out


def _normalize(R, inv_sqrts, L):
    A = R.copy()
    M = len(inv_sqrts)
    for m in range(M):
        A[m * L:(m + 1) * L, :] = inv_sqrts[m] @ A[m * L:(m + 1) * L, :]
    for m in range(M):
        A[:, m * L:(m + 1) * L] = A[:, m * L:(m + 1) * L] @ inv_sqrts[m]
    return hermitize(A)


def sample_block_corr(ens, R_hat=None):
    """``R^_corr = B^^{-1/2} R^_L B^^{-1/2}`` with ``B^ = Bdiag(R^_L)``.

    Raises
    ------
    SingularBlockError
        If a diagonal block has condition number above ``COND_MAX``.
    """
    R_hat = sample_cov(ens) if R_hat is None else R_hat
    L = R_hat.L
    blocks = R_hat.diagonal_blocks()
    A = _normalize(R_hat.matrix, _inv_sqrt_blocks(blocks), L)
    return BlockHermitian(A, R_hat.M, L)


def true_inv_sqrt_blocks(bank, L):
    """``R_{m,L}^{-1/2}`` for each series (computed once per distinct model)."""
    cache = {}
    out = []
    for mdl in bank:
        if mdl not in cache:
            cache[mdl] = inv_sqrt(toeplitz_covariance(mdl, L))
        out.append(cache[mdl])
    return out


def oracle_block_corr(ens, bank, R_hat=None, inv_sqrts=None):
    """``R-bar_corr = B^{-1/2} R^_L B^{-1/2}`` with the true ``B = blockdiag(R_{m,L})``."""
    R_hat = sample_cov(ens) if R_hat is None else R_hat
    if bank.M != R_hat.M:
        raise ValueError("bank and ensemble disagree on M")
    if bank.is_white():
        return BlockHermitian(R_hat.matrix.copy(), R_hat.M, R_hat.L)
    inv_sqrts = true_inv_sqrt_blocks(bank, R_hat.L) if inv_sqrts is None else inv_sqrts
    return BlockHermitian(_normalize(R_hat.matrix, inv_sqrts, R_hat.L), R_hat.M, R_hat.L)


def sample_autocov(ens, max_lag=None):
    """Biased autocovariances ``r^_m(l) = (1/N) sum_{n<N-l} y_{m,n+l} conj(y_{m,n})``, ``0 <= l <= max_lag``."""
    M, N, L = ens.dims
    max_lag = L - 1 if max_lag is None else max_lag
    y = ens.data[:, :N]
    out = np.empty((M, max_lag + 1), dtype=complex)
    for l in range(max_lag + 1):
        out[:, l] = np.sum(y[:, l:] * np.conj(y[:, :N - l]), axis=1) / N
    return out


def lag_window_estimator(ens, nu):
    """``S^_m(nu) = sum_{|l|<L} r^_m(l) e^{-2i pi l nu}``, real by Hermitian symmetry."""
    nu = np.asarray(nu, dtype=float)
    r = sample_autocov(ens)
    L = ens.L
    phase = np.exp(-2j * np.pi * np.outer(np.arange(1, L), nu))
    return np.real(r[:, :1]) + 2.0 * np.real(r[:, 1:] @ phase)


def toeplitz_block_estimate(ens, m):
    """L x L Toeplitz matrix with entries ``r^_m(k - k')``."""
    r = sample_autocov(ens)[m]
    L = ens.L
    coeffs = np.concatenate([np.conj(r[:0:-1]), r])
    return toeplitz_from_coeffs(coeffs, L)


def expected_lag_window(model, L, N, nu):
    """``E S^(nu) = sum_{|l|<L} (1 - |l|/N) r(l) e^{-2i pi l nu}``."""
    l = np.arange(-(L - 1), L)
    w = (1 - np.abs(l) / N) * model.lags(l)
    return np.real(np.exp(-2j * np.pi * np.outer(np.atleast_1d(nu), l)) @ w)


def expected_periodogram_bias(model, L, nu):
    """``sum_{|l|<=L-2} (1 - |l|/L) r(l) e^{-2i pi l nu} - S(nu)``."""
    if L < 2:
        raise ValueError("L must be >= 2")
    l = np.arange(-(L - 2), L - 1)
    w = (1 - np.abs(l) / L) * model.lags(l)
    nu_arr = np.atleast_1d(np.asarray(nu, dtype=float))
    val = np.real(np.exp(-2j * np.pi * np.outer(nu_arr, l)) @ w) - spectral_density(model, nu_arr)
    return float(val[0]) if np.ndim(nu) == 0 else val


def eigen_stats(mat, statistics=("sq_dev", "mean"), N=None):
    """Eigenvalues and linear spectral statistics ``(1/ML) sum phi(lambda_k)``.

    Eigenvalues below ``EIG_FLOOR`` in magnitude are clamped to 0 before the
    statistics are applied.
    """
    if isinstance(mat, BlockHermitian):
        A, M, L = mat.matrix, mat.M, mat.L
    else:
        A = np.asarray(mat)
        M, L = 1, A.shape[0]
    lam = np.linalg.eigvalsh(hermitize(A))
    lam_c = np.where(np.abs(lam) < EIG_FLOOR, 0.0, lam)
    lss = {}
    for name in statistics:
        if callable(name):
            fn, key = name, getattr(name, "__name__", "phi")
        else:
            if name not in STATISTICS:
                raise DomainError(f"unknown statistic {name!r}")
            fn, key = STATISTICS[name], name
        lss[key] = float(np.mean(fn(lam_c)))
    return SpectralStats(lam, lss, (M, N, L))


def sq_dev_trace(mat):
    """``(1/ML) ||A - I||_F^2``, eigen-free value of the ``sq_dev`` statistic."""
    A = mat.matrix if isinstance(mat, BlockHermitian) else np.asarray(mat)
    D = A - np.eye(A.shape[0])
    return float(np.sum(np.abs(D) ** 2) / A.shape[0])


def histogram(values, bins=None, range_=None):
    """Density histogram; default bin edges follow Freedman-Diaconis."""
    values = np.asarray(values, dtype=float)
    bins = "fd" if bins is None else bins
    dens, edges = np.histogram(values, bins=bins, range=range_, density=True)
    return edges[:-1], edges[1:], dens


def write_histogram_csv(path, left, right, dens, extra=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["bin_left", "bin_right", "density"] if extra is None else \
            ["bin_left", "bin_right", "empirical_density"] + list(extra)
        w.writerow(head)
        cols = [left, right, dens] + ([] if extra is None else list(extra.values()))
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
