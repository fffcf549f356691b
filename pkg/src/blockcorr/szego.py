"""Szego orthogonal polynomials, Levinson recursion and the error matrix E_N.

The inner product on polynomials is ``<z^k, z^l> = r(k - l)``.  Monic
orthogonal polynomials obey

    Phi_{n+1}(z)  = z Phi_n(z) - alpha_n Phi*_n(z)
    Phi*_{n+1}(z) = Phi*_n(z) - conj(alpha_n) z Phi_n(z)

with ``Phi*_n(z) = 1 + sum_k a_{k,n} z^k`` and ``(1, a_n) = sigma2_n R_{n+1}^{-T} e_1``.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import GridError, NonPositiveVariance
from .toeplitz import symbol_coefficients, toeplitz_from_symbol
from .tsmodel import spectral_density, toeplitz_covariance

TRACE_TOL = 1e-8


@dataclass
class SzegoChain:
    """Output of the Levinson recursion up to ``order``.

    Attributes
    ----------
    reflection : (order,) complex
        Reflection (Verblunsky) coefficients ``alpha_0 .. alpha_{order-1}``.
    sigma2 : (order + 1,) float
        Prediction-error variances ``sigma2_0 = r(0) >= sigma2_1 >= ...``.
    predictors : list of complex arrays
        ``predictors[l]`` is ``(1, a_{1,l}, ..., a_{l,l})``, the coefficients
        of ``Phi*_l`` in increasing powers of z.
    """

    order: int
    reflection: np.ndarray
    sigma2: np.ndarray
    predictors: list = field(repr=False)

    def predictor(self, l):
        """``a_l = (a_{1,l}, ..., a_{l,l})``."""
        return self.predictors[l][1:]

    def phi_star(self, nu, upto=None):
        """Values ``Phi*_l(e^{2i pi nu})`` for ``l = 0 .. upto - 1``, shape (upto, len(nu)).

        Runs the recursion pointwise on the grid, O(upto * len(nu)).
        """
        upto = self.order + 1 if upto is None else upto
        if upto > self.order + 1:
            raise ValueError(f"chain only reaches order {self.order}")
        z = np.exp(2j * np.pi * np.atleast_1d(np.asarray(nu, dtype=float)))
        out = np.empty((upto, z.size), dtype=complex)
        p = np.ones_like(z)      # Phi_n
        ps = np.ones_like(z)     # Phi*_n
        out[0] = ps
        for n in range(upto - 1):
            a = self.reflection[n]
            p, ps = z * p - a * ps, ps - np.conj(a) * z * p
            out[n + 1] = ps
        return out

    def phi_star_l1_norms(self):
        """``||Phi*_n||_1`` (sum of absolute coefficients) for each order."""
        return np.array([np.abs(c).sum() for c in self.predictors])


def levinson(model, order):
    """Levinson recursion for the covariance sequence of ``model``.

    Raises
    ------
    NonPositiveVariance
        If some prediction-error variance is not positive.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    r = model.lags(np.arange(order + 1))
    r0 = r[0].real
    if r0 <= 0:
        raise NonPositiveVariance(f"r(0) = {r[0]} is not positive")
    alphas = np.zeros(order, dtype=complex)
    sigma2 = np.zeros(order + 1)
    sigma2[0] = r0
    a = np.ones(1, dtype=complex)
    predictors = [a]
    for n in range(order):
        # <z Phi_n, 1> with Phi_n coefficients conj(a[::-1])
        alpha = np.sum(np.conj(a) * r[n + 1 - np.arange(n + 1)]) / sigma2[n]
        alphas[n] = alpha
        new = np.zeros(n + 2, dtype=complex)
        new[:n + 1] = a
        new[1:] -= np.conj(alpha) * np.conj(a[::-1])
        s2 = sigma2[n] * (1.0 - abs(alpha) ** 2)
        if not s2 > 0:
            raise NonPositiveVariance(f"sigma2_{n + 1} = {s2:.3e} <= 0 (|alpha_{n}| = {abs(alpha):.6f})")
        sigma2[n + 1] = s2
        a = new
        predictors.append(a)
    return SzegoChain(order, alphas, sigma2, predictors)


def yule_walker_dense(model, l):
    """Dense solve of ``(1, a_l) = sigma2_l R_{l+1}^{-T} e_1``; returns ``(a_l, sigma2_l)``."""
    R = toeplitz_covariance(model, l + 1)
    e1 = np.zeros(l + 1)
    e1[0] = 1.0
    v = np.linalg.solve(R.T, e1)
    s2 = 1.0 / v[0]
    return (s2 * v)[1:], float(np.real(s2))


def cholesky_inverse_factor(model, L):
    """Factor ``R_L^{-1} = A diag(1 / d) A^H``.

    Returns
    -------
    A : (L, L) complex
        Upper unitriangular; column l holds ``a_{l,l}, ..., a_{1,l}, 1``.
    d : (L,) float
        Prediction-error variances ``sigma2_0 .. sigma2_{L-1}``.
    """
    A = np.zeros((L, L), dtype=complex)
    if L == 1:
        A[0, 0] = 1.0
        return A, np.array([model.lags(0).real.item()])
    chain = levinson(model, L - 1)
    for l in range(L):
        A[:l + 1, l] = chain.predictors[l][::-1]
    return A, chain.sigma2[:L].copy()


def quad_form_identity(model, L, nu, chain=None):
    """``a_L(nu)^H R_L^{-1} a_L(nu) = (1/L) sum_{l<L} |Phi*_l|^2 / sigma2_l``."""
    scalar = np.ndim(nu) == 0
    if chain is None:
        chain = levinson(model, max(L - 1, 1))
    vals = np.abs(chain.phi_star(nu, upto=L)) ** 2
    q = (vals / chain.sigma2[:L, None]).sum(axis=0) / L
    return float(q[0]) if scalar else q


def quad_form_dense(model, L, nu):
    """Reference route: dense solve with the L x L Toeplitz covariance."""
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    R = toeplitz_covariance(model, L)
    a = np.exp(2j * np.pi * np.outer(np.arange(L), nu)) / np.sqrt(L)
    x = np.linalg.solve(R, a)
    return np.real(np.sum(np.conj(a) * x, axis=0))


def epsilon(model, L, nu, chain=None):
    """``eps_{m,L}(nu) = S(nu) a_L^H R_L^{-1} a_L - 1``."""
    nu = np.asarray(nu, dtype=float)
    if model.kind == "white":
        return np.zeros(np.shape(nu))
    return spectral_density(model, nu) * quad_form_identity(model, L, nu, chain=chain) - 1.0


def default_grid_size(L, N=0):
    return max(4096, 16 * L, 4 * N)


@dataclass
class ErrorMatrixReport:
    """Averaged normalization error ``eps-bar`` and its N x N Toeplitz matrix."""

    L: int
    N: int
    nu: np.ndarray = field(repr=False)
    eps_grid: np.ndarray = field(repr=False)
    E_N: np.ndarray = field(repr=False)
    sup_eps: float = 0.0
    trace_E: float = 0.0
    correction: float = 0.0

    @property
    def eps_bar(self):
        return self.eps_grid.mean(axis=0)

    def trace_ok(self, tol=TRACE_TOL):
        return abs(self.trace_E) <= tol * self.N

    def to_dict(self):
        return {"L": self.L, "N": self.N, "sup_eps": self.sup_eps,
                "trace_E": self.trace_E, "correction": self.correction}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def write_eps_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["nu"] + [f"eps_{m}" for m in range(self.eps_grid.shape[0])])
            for g, nu in enumerate(self.nu):
                w.writerow([repr(float(nu))] + [repr(float(v)) for v in self.eps_grid[:, g]])


def error_matrix(bank, L, N, grid_size=None):
    """Build ``E_N = int eps-bar(nu) d_N d_N^H dnu`` for a model bank.

    ``correction`` is ``(1/N) Tr(E_N (I + E_N))``.
    """
    G = default_grid_size(L, N) if grid_size is None else int(grid_size)
    if G < 4 * N:
        raise GridError(f"grid of {G} points is too coarse for N={N} (need >= {4 * N})")
    nu = np.arange(G) / G
    eps_grid = np.zeros((bank.M, G))
    for mdl, idx in bank.groups().items():
        eps_grid[idx] = epsilon(mdl, L, nu)
    eps_bar = eps_grid.mean(axis=0)
    E = toeplitz_from_symbol(eps_bar, N)
    E = 0.5 * (E + E.conj().T)
    trace_E = float(np.real(np.trace(E)))
    correction = float(np.real(np.trace(E) + np.sum(np.abs(E) ** 2))) / N
    return ErrorMatrixReport(
        L=L, N=N, nu=nu, eps_grid=eps_grid, E_N=E,
        sup_eps=float(np.abs(eps_grid).max()), trace_E=trace_E, correction=correction,
    )


def correction_from_coefficients(eps_bar_values, N):
    """``(1/N) sum_{|l|<N} (N - |l|) |e(l)|^2 + e(0)``: diagonal-sum form of the correction."""
    e = symbol_coefficients(eps_bar_values, N - 1)
    w = N - np.abs(np.arange(-(N - 1), N))
    return float(np.real(e[N - 1]) + np.sum(w * np.abs(e) ** 2) / N)
