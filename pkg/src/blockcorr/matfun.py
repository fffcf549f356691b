"""Hermitian functional calculus: inverse square roots and the differential of A -> A^{-1/2}."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite

CLUSTER_TOL = 1e-8


@dataclass
class SpectralDecomposition:
    """Distinct eigenvalues and orthogonal projectors, ``H = sum_k lam_k P_k``."""

    eigenvalues: np.ndarray
    projectors: list

    @classmethod
    def of(cls, H, tol=CLUSTER_TOL):
        w, V = np.linalg.eigh(H)
        scale = max(np.abs(w).max(), 1.0)
        groups = [[0]]
        for i in range(1, len(w)):
            if w[i] - w[groups[-1][0]] <= tol * scale:
                groups[-1].append(i)
            else:
                groups.append([i])
        lam = np.array([w[g].mean() for g in groups])
        projs = [V[:, g] @ V[:, g].conj().T for g in groups]
        return cls(lam, projs)

    def reconstruct(self):
        return sum(l * P for l, P in zip(self.eigenvalues, self.projectors))


def _eigh_pd(H):
    H = np.asarray(H)
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    if w[0] <= 0:
        raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.3e} is not positive")
    return w, V


def inv_sqrt(H):
    """Hermitian ``H^{-1/2}`` via the eigendecomposition."""
    w, V = _eigh_pd(H)
    out = (V / np.sqrt(w)) @ V.conj().T
    return 0.5 * (out + out.conj().T)


def d_operator(H, X):
    """Differential of ``A -> A^{-1/2}`` at H applied to X (sign convention: positive kernel).

    ``D(X) = sum_{k,l} P_k X P_l / (sqrt(l_k) sqrt(l_l) (sqrt(l_k) + sqrt(l_l)))``, so that
    ``(H + dH)^{-1/2} = H^{-1/2} - D(dH) + O(||dH||^2)``.
    """
    w, V = _eigh_pd(H)
    s = np.sqrt(w)
    kernel = 1.0 / (np.outer(s, s) * (s[:, None] + s[None, :]))
    Xe = V.conj().T @ np.asarray(X) @ V
    return V @ (kernel * Xe) @ V.conj().T


def d_operator_projectors(H, X, tol=CLUSTER_TOL):
    """Same operator evaluated from grouped spectral projectors (reference route)."""
    sd = SpectralDecomposition.of(H, tol)
    s = np.sqrt(sd.eigenvalues)
    out = np.zeros_like(np.asarray(X), dtype=complex)
    for k, Pk in enumerate(sd.projectors):
        for l, Pl in enumerate(sd.projectors):
            out += Pk @ X @ Pl / (s[k] * s[l] * (s[k] + s[l]))
    return out


def d_norm_constant(s_min):
    """Bound ``||D(A)|| <= kappa ||A||`` with ``kappa = 1 / (2 s_min^{3/2})``."""
    return 1.0 / (2.0 * s_min ** 1.5)


def random_hermitian_direction(n, rng):
    """Random Hermitian matrix of unit spectral norm."""
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    A = 0.5 * (A + A.conj().T)
    return A / np.linalg.norm(A, 2)


def perturbation_check(H, scales, rng=None, direction=None):
    """First-order remainder ``||(H + s D0)^{-1/2} - H^{-1/2} + D(s D0)||`` for each scale s.

    Returns a list of ``(s, error)`` pairs; ``D0`` is Hermitian with unit norm.
    """
    H = np.asarray(H)
    if direction is None:
        rng = np.random.default_rng(0) if rng is None else rng
        direction = random_hermitian_direction(H.shape[0], rng)
    base = inv_sqrt(H)
    table = []
    for s in scales:
        if s == 0:
            table.append((0.0, 0.0))
            continue
        diff = inv_sqrt(H + s * direction) - base + d_operator(H, s * direction)
        table.append((float(s), float(np.linalg.norm(diff, 2))))
    return table
