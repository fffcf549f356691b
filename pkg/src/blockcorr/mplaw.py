"""Marchenko-Pastur law of parameter c: Stieltjes transforms, density, CDF, integrals.

``t(z)`` is the root of ``t = 1 / (-z + 1 / (1 + c t))`` with ``Im t >= 0``, that
is of ``c z t^2 + (z + c - 1) t + 1 = 0``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import integrate as sp_integrate

from .errors import DomainError

_GL_NODES = 256
_BRANCH_TOL = 1e-10
_HOMOTOPY_IM = 0.1


@dataclass(frozen=True)
class MPLaw:
    """Marchenko-Pastur distribution of aspect parameter ``c = ML / N``."""

    c: float

    def __post_init__(self):
        if not (0 < self.c < np.inf):
            raise DomainError(f"MP parameter must be in (0, inf), got {self.c}")

    @property
    def lam_minus(self):
        return (1 - np.sqrt(self.c)) ** 2

    @property
    def lam_plus(self):
        return (1 + np.sqrt(self.c)) ** 2

    @property
    def edges(self):
        return self.lam_minus, self.lam_plus

    @property
    def atom_mass(self):
        return max(0.0, 1.0 - 1.0 / self.c)


def _roots(c, z):
    b = z + c - 1
    disc = np.sqrt(b * b - 4 * c * z + 0j)
    return (-b + disc) / (2 * c * z), (-b - disc) / (2 * c * z)


def _pick(c, z, prev=None):
    r1, r2 = _roots(c, z)
    if prev is not None:
        return r1 if abs(r1 - prev) <= abs(r2 - prev) else r2
    return r1 if r1.imag >= r2.imag else r2


def _stieltjes_scalar(c, z):
    r1, r2 = _roots(c, z)
    if max(r1.imag, r2.imag) > _BRANCH_TOL * max(1.0, abs(r1), abs(r2)):
        return r1 if r1.imag >= r2.imag else r2
    # both roots (nearly) real: follow the branch down from Im z = 0.1
    y0 = max(_HOMOTOPY_IM, z.imag)
    t = _pick(c, complex(z.real, y0))
    for y in np.geomspace(y0, z.imag, 60)[1:]:
        t = _pick(c, complex(z.real, y), prev=t)
    return t


def stieltjes_t(law, z):
    """Stieltjes transform ``t(z) = int (lam - z)^{-1} dmu_mp(lam)``.

    Raises
    ------
    DomainError
        If ``Im z <= 0`` anywhere.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise DomainError("the Stieltjes transform is evaluated on Im z > 0")
    out = np.array([_stieltjes_scalar(law.c, zz) for zz in z.ravel()]).reshape(z.shape)
    return out[()] if out.ndim == 0 else out


def stieltjes_t_tilde(law, z, t=None):
    """``t~(z) = c t(z) - (1 - c) / z``, the transform of ``c mu_mp + (1 - c) delta_0``."""
    z = np.asarray(z, dtype=complex)
    t = stieltjes_t(law, z) if t is None else t
    return law.c * t - (1 - law.c) / z


def stieltjes_t_tilde_alt(law, z, t=None):
    """Second route ``t~(z) = -1 / (z (1 + c t(z)))``."""
    z = np.asarray(z, dtype=complex)
    t = stieltjes_t(law, z) if t is None else t
    return -1.0 / (z * (1 + law.c * t))


def fixed_point_residual(law, z, t):
    return np.abs(t - 1.0 / (-z + 1.0 / (1 + law.c * t)))


def u_factor(law, z):
    """``u(z) = c (z t t~)^2``; ``|u| < 1`` on the upper half plane."""
    z = np.asarray(z, dtype=complex)
    t = stieltjes_t(law, z)
    tt = stieltjes_t_tilde(law, z, t)
    return law.c * (z * t * tt) ** 2


def density(law, lam):
    """Absolutely continuous part of the MP law; the atom is in ``law.atom_mass``."""
    lam = np.asarray(lam, dtype=float)
    lm, lp = law.edges
    inside = (lam > lm) & (lam < lp)
    safe = np.where(inside, lam, 1.0)
    val = np.sqrt(np.clip((lp - safe) * (safe - lm), 0, None)) / (2 * np.pi * law.c * safe)
    return np.where(inside, val, 0.0)


def _gl_rule(n=_GL_NODES):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _bulk_quad(law, phi, theta_hi=np.pi / 2, n=_GL_NODES):
    """``int_{lam-}^{lam(theta_hi)} phi rho dlam`` with ``lam = lam- + (lam+ - lam-) sin^2 theta``.

    ``theta_hi`` may be an array; the result then has its shape.
    """
    lm, lp = law.edges
    x, w = _gl_rule(n)
    th = np.asarray(theta_hi, dtype=float)[..., None]
    theta = 0.5 * th * (x + 1)
    wt = 0.5 * th * w
    lam = lm + (lp - lm) * np.sin(theta) ** 2
    # d lam = (lp - lm) sin 2theta dtheta; sqrt((lp-lam)(lam-lm)) = (lp-lm) sin cos
    jac = (lp - lm) ** 2 * np.sin(theta) * np.cos(theta) * np.sin(2 * theta)
    return np.sum(wt * phi(lam) * jac / (2 * np.pi * law.c * lam), axis=-1)


def _as_callable(phi):
    if callable(phi):
        return phi
    from .sampling import STATISTICS
    if phi not in STATISTICS:
        raise DomainError(f"unknown statistic {phi!r}")
    return STATISTICS[phi]


def integrate_quadrature(law, phi):
    """Gauss-Legendre integral of ``phi`` against the bulk plus the atom at 0."""
    f = _as_callable(phi)
    total = float(_bulk_quad(law, f))
    if law.atom_mass > 0:
        total += law.atom_mass * float(f(np.array([0.0]))[0])
    return float(total)


def integrate(law, phi):
    """``int phi dmu_mp``.  ``"sq_dev"`` uses the closed form ``c``, ``"mean"`` gives 1."""
    if isinstance(phi, str):
        if phi == "sq_dev":
            return float(law.c)
        if phi == "mean":
            return 1.0
    if isinstance(phi, tuple):
        lam, vals = (np.asarray(v, dtype=float) for v in phi)
        f = lambda x: np.interp(x, lam, vals)  # noqa: E731
        return integrate_quadrature(law, f)
    return integrate_quadrature(law, phi)


def cdf(law, x):
    """Distribution function, right-continuous, including the atom at 0."""
    x = np.asarray(x, dtype=float)
    lm, lp = law.edges
    out = np.where(x >= 0, law.atom_mass, 0.0)
    inside = (x > lm) & (x < lp)
    if np.any(inside):
        xs = x[inside]
        th = np.arcsin(np.sqrt((xs - lm) / (lp - lm)))
        out_in = _bulk_quad(law, np.ones_like, th, n=64)
        out = out.astype(float)
        out[inside] += out_in
    out = np.where(x >= lp, 1.0, out)
    return out


def moment(law, k):
    """k-th moment by quadrature."""
    return integrate_quadrature(law, lambda x: x ** k)


def quad_reference_stieltjes(law, z):
    """Adaptive-quadrature evaluation of ``int (lam - z)^{-1} dmu_mp``, test oracle."""
    lm, lp = law.edges
    re = sp_integrate.quad(lambda x: (density(law, x) / (x - z)).real, lm, lp, limit=200, epsabs=1e-13)[0]
    im = sp_integrate.quad(lambda x: (density(law, x) / (x - z)).imag, lm, lp, limit=200, epsabs=1e-13)[0]
    return re + 1j * im - law.atom_mass / z


def write_density_csv(law, lam, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "density"])
        for x, d in zip(np.asarray(lam, float), density(law, lam)):
            w.writerow([repr(float(x)), repr(float(d))])
