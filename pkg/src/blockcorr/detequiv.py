"""Deterministic equivalent mu_N: solver of the canonical equations and derived quantities.

For z in the upper half plane the pair (T, T~) solves

    T  = -1/z (I_ML + B^{-1/2} Psi(T~^T) B^{-1/2})^{-1}
    T~ = -1/z (I_N + c Psi-bar^T(B^{-1/2} T B^{-1/2}))^{-1}

with ``B = blockdiag(R_{m,L})`` and ``c = ML / N``; ``(1/ML) Tr T(z)`` is the
Stieltjes transform of mu_N.  T is block diagonal and its block m depends only
on the covariance model of series m, so one block is stored per distinct model.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import mplaw
from .blocks import assemble_block_diagonal
from .errors import DomainError, NoConvergence
from .matfun import inv_sqrt
from .szego import error_matrix
from .toeplitz import psi_coeffs_from_tau, psi_m_from_tau, tau_sequence, toeplitz_from_coeffs
from .tsmodel import toeplitz_covariance

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 500
REPORT_IM = (1e-2, 1e-1, 1.0)


class _Problem:
    """Per-(bank, L, N) constants shared by every solve."""

    def __init__(self, bank, L, N):
        self.bank, self.L, self.N, self.M = bank, int(L), int(N), bank.M
        self.c = self.M * self.L / self.N
        groups = bank.groups()
        self.models = list(groups)
        self.counts = np.array([len(groups[g]) for g in self.models])
        self.index = [groups[g] for g in self.models]
        self.R = [toeplitz_covariance(g, self.L) for g in self.models]
        self.Rm12 = [inv_sqrt(R) for R in self.R]

    def tilde_from_T(self, z, blocks):
        """Right-hand side of the T~ equation for block-diagonal T given by group blocks."""
        N = self.N
        coeffs = np.zeros(2 * N - 1, dtype=complex)
        for g, (mdl, Tg) in enumerate(zip(self.models, blocks)):
            X = self.Rm12[g] @ Tg @ self.Rm12[g]
            coeffs += self.counts[g] * psi_coeffs_from_tau(mdl, tau_sequence(X), N)
        psibar_T = toeplitz_from_coeffs(coeffs / self.M, N).T
        return -np.linalg.inv(np.eye(N) + self.c * psibar_T) / z

    def T_from_tilde(self, z, Tt):
        t = tau_sequence(Tt.T)
        L = self.L
        out = []
        for g, mdl in enumerate(self.models):
            P = psi_m_from_tau(mdl, t, L)
            out.append(-np.linalg.inv(np.eye(L) + self.Rm12[g] @ P @ self.Rm12[g]) / z)
        return out

    def expand(self, blocks):
        full = [None] * self.M
        for g, idx in enumerate(self.index):
            for m in idx:
                full[m] = blocks[g]
        return assemble_block_diagonal(full)

    def weighted_norm(self, blocks):
        return np.sqrt(sum(n * np.sum(np.abs(B) ** 2) for n, B in zip(self.counts, blocks)))


@dataclass
class StieltjesPair:
    """Solution of the canonical equations at one point z."""

    z: complex
    T_blocks: list = field(repr=False)
    T_tilde: np.ndarray = field(repr=False)
    iterations: int
    residual: float
    problem: _Problem = field(repr=False)

    @property
    def T(self):
        """Full ``ML x ML`` block-diagonal T(z)."""
        return self.problem.expand(self.T_blocks)

    @property
    def dims(self):
        p = self.problem
        return p.M, p.L, p.N


def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), 1e-300)


def canonical_residuals(pair):
    """Relative Frobenius residuals of the T and T~ equations at the returned pair."""
    p, z = pair.problem, pair.z
    rhs_T = p.T_from_tilde(z, pair.T_tilde)
    num = p.weighted_norm([a - b for a, b in zip(pair.T_blocks, rhs_T)])
    r1 = num / p.weighted_norm(pair.T_blocks)
    r2 = _rel(pair.T_tilde, p.tilde_from_T(z, pair.T_blocks))
    return float(r1), float(r2)


def _check_M(bank, M):
    if M != bank.M:
        raise ValueError(f"M={M} does not match the bank size {bank.M}")


def solve_canonical(bank, M, L, N, z, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, damping=1.0,
                    problem=None, init=None):
    """Fixed-point solution ``(T(z), T~(z))`` of the canonical equations.

    The iteration updates T~ from the current T, then T from T~, starting at the
    Marchenko-Pastur pair ``(t I, t~ I)``.  An optional relaxation
    ``T <- (1 - w) T + w F(T)`` starts at ``damping`` and halves (down to 0.5)
    whenever the step size grows.

    Raises
    ------
    DomainError
        If ``Im z <= 0``.
    NoConvergence
        If the relative change stays above ``tol`` after ``max_iter`` steps.
    """
    _check_M(bank, M)
    z = complex(z)
    if z.imag <= 0:
        raise DomainError("canonical equations are solved for Im z > 0")
    if tol <= 0:
        raise ValueError("tol must be positive")
    p = _Problem(bank, L, N) if problem is None else problem
    law = mplaw.MPLaw(p.c)
    if init is None:
        t = mplaw.stieltjes_t(law, z)
        blocks = [t * np.eye(p.L, dtype=complex) for _ in p.models]
    else:
        blocks = [np.array(b, dtype=complex) for b in init]
    omega = float(damping)
    prev_step = np.inf
    Tt = None
    for it in range(1, max_iter + 1):
        Tt = p.tilde_from_T(z, blocks)
        new = p.T_from_tilde(z, Tt)
        step = p.weighted_norm([a - b for a, b in zip(new, blocks)]) / p.weighted_norm(new)
        if step > prev_step and omega > 0.5:
            omega = 0.5
        prev_step = step
        if omega == 1.0:
            blocks = new
        else:
            blocks = [(1 - omega) * b + omega * a for a, b in zip(new, blocks)]
        if step < tol:
            Tt = p.tilde_from_T(z, blocks)
            pair = StieltjesPair(z, blocks, Tt, it, 0.0, p)
            pair.residual = max(canonical_residuals(pair))
            return pair
    raise NoConvergence(max_iter, prev_step, z)


def trace_stieltjes(pair):
    """``(1/ML) Tr T(z)``, the Stieltjes transform of mu_N at ``pair.z``."""
    p = pair.problem
    return complex(sum(n * np.trace(B) for n, B in zip(p.counts, pair.T_blocks)) / (p.M * p.L))


def trace_tilde(pair):
    return complex(np.trace(pair.T_tilde) / pair.problem.N)


def stieltjes_class_defects(pair):
    """Worst violations of the Stieltjes-class properties at ``pair.z``.

    Returns a dict with the smallest eigenvalue of ``Im T`` and ``Im(zT)`` (should
    be >= 0) and the excess ``||T|| - 1/Im z`` (should be <= 0), for T and T~.
    """
    z = pair.z
    out = {}
    for name, mats in (("T", pair.T_blocks), ("T_tilde", [pair.T_tilde])):
        im_min, imz_min, norm_max = np.inf, np.inf, 0.0
        for A in mats:
            imA = (A - A.conj().T) / 2j
            zA = z * A
            imzA = (zA - zA.conj().T) / 2j
            im_min = min(im_min, np.linalg.eigvalsh(imA)[0])
            imz_min = min(imz_min, np.linalg.eigvalsh(imzA)[0])
            norm_max = max(norm_max, np.linalg.norm(A, 2))
        out[name] = {"im_min": float(im_min), "imz_min": float(imz_min),
                     "norm_excess": float(norm_max - 1.0 / z.imag)}
    return out


def density_mu_N(bank, M, L, N, x, eta, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Smoothed density ``Im[(1/ML) Tr T(x + i eta)] / pi`` on a grid of x.

    This is the Poisson-kernel smoothing of mu_N at width eta, not its limit.
    """
    _check_M(bank, M)
    p = _Problem(bank, L, N)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(x.shape)
    for i, xi in enumerate(x):
        pair = solve_canonical(bank, bank.M, L, N, complex(xi, eta), tol=tol, max_iter=max_iter, problem=p)
        out[i] = trace_stieltjes(pair).imag / np.pi
    return out


def contour_moments(bank, M, L, N, kmax=2, radius=None, n_points=64, tol=1e-12):
    """Moments ``int lam^k dmu_N`` for ``k <= kmax`` from contour integrals of the solver output.

    ``-(1/ML) Tr T(z) = sum_k m_k z^{-k-1}`` outside the support, so
    ``m_k = (1/2i pi) oint z^k (-(1/ML) Tr T(z)) dz`` on a circle enclosing it;
    the lower half circle follows by conjugate symmetry.
    """
    _check_M(bank, M)
    p = _Problem(bank, L, N)
    if radius is None:
        radius = 2.0 * mplaw.MPLaw(p.c).lam_plus + 2.0
    theta = np.pi * (np.arange(n_points) + 0.5) / n_points
    zs = radius * np.exp(1j * theta)
    s = np.array([trace_stieltjes(solve_canonical(bank, bank.M, L, N, z, tol=tol, problem=p)) for z in zs])
    moments = []
    for k in range(kmax + 1):
        # (1/2i pi) oint f dz with dz = i z dtheta; upper half plus conjugate lower half
        integrand = zs ** k * (-s) * zs
        upper = np.sum(integrand) * (np.pi / n_points) / (2 * np.pi)
        moments.append(float(2 * upper.real))
    return moments


@dataclass
class DetEquivReport:
    """Comparison of mu_N with the Marchenko-Pastur law of parameter ``c = ML/N``."""

    dims: tuple
    z_grid: np.ndarray = field(repr=False)
    trace_T: np.ndarray = field(repr=False)
    mp_trace: np.ndarray = field(repr=False)
    sq_dev_integral: float = 0.0
    mp_sq_dev: float = 0.0
    correction: float = 0.0

    @property
    def gap(self):
        return np.abs(self.trace_T - self.mp_trace)

    def to_dict(self):
        return {
            "dims": list(self.dims),
            "z_grid": [[float(z.real), float(z.imag)] for z in self.z_grid],
            "trace_T": [[float(v.real), float(v.imag)] for v in self.trace_T],
            "mp_trace": [[float(v.real), float(v.imag)] for v in self.mp_trace],
            "sq_dev_integral": self.sq_dev_integral,
            "mp_sq_dev": self.mp_sq_dev,
            "correction": self.correction,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def sq_dev_integral(bank, M, L, N, grid_size=None):
    """``int (lam - 1)^2 dmu_N`` in closed form.

    Returns ``(value, correction, correction_psi)`` where ``value = c + correction``,
    ``correction = c (1/N) Tr(E_N (I + E_N))`` and ``correction_psi`` is the same
    quantity evaluated as ``c (1/ML) Tr(B^{-1} Psi(E_N))``.
    """
    _check_M(bank, M)
    c = M * L / N
    rep = error_matrix(bank, L, N, grid_size)
    correction = c * rep.correction
    t = tau_sequence(rep.E_N)
    acc = 0.0
    for mdl, idx in bank.groups().items():
        P = psi_m_from_tau(mdl, t, L)
        Rinv = np.linalg.inv(toeplitz_covariance(mdl, L))
        acc += len(idx) * np.real(np.trace(Rinv @ P)) / L
    correction_psi = c * acc / M
    return c + correction, correction, float(correction_psi)


def default_z_grid(c):
    lp = mplaw.MPLaw(c).lam_plus
    re = np.linspace(-1.0, lp + 1.0, 9)
    return np.array([complex(x, y) for y in REPORT_IM for x in re])


def detequiv_report(bank, L, N, z_grid=None, tol=DEFAULT_TOL, max_iter=2000):
    """Traces of T against the MP transform on a z grid plus the sq_dev comparison."""
    p = _Problem(bank, L, N)
    z_grid = default_z_grid(p.c) if z_grid is None else np.asarray(z_grid, dtype=complex)
    law = mplaw.MPLaw(p.c)
    traces = np.array([
        trace_stieltjes(solve_canonical(bank, bank.M, L, N, z, tol=tol, max_iter=max_iter, problem=p))
        for z in z_grid
    ])
    value, correction, _ = sq_dev_integral(bank, bank.M, L, N)
    return DetEquivReport(
        dims=(bank.M, N, L), z_grid=z_grid, trace_T=traces,
        mp_trace=np.asarray(mplaw.stieltjes_t(law, z_grid)),
        sq_dev_integral=value, mp_sq_dev=p.c, correction=correction,
    )


def write_density_csv(path, x, dens_mu, dens_mp):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "density_muN", "density_mp"])
        for row in zip(x, dens_mu, dens_mp):
            w.writerow([repr(float(v)) for v in row])
