"""Stationary circular complex Gaussian series: covariance models and sampling.

Conventions
-----------
The covariance sequence is ``r(k) = E[y_{n+k} conj(y_n)]`` so that
``r(-k) = conj(r(k))`` and the L x L Toeplitz covariance has entries
``R[k, k'] = r(k - k')``.  The spectral density is the Fourier series
``S(nu) = sum_k r(k) exp(-2i pi nu k)``, which inverts to
``r(k) = int_0^1 S(nu) exp(2i pi nu k) dnu``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import linalg, signal

from .errors import ParseError, PositivityError

KINDS = ("white", "ar1", "custom")

# Positivity checks for custom sequences.
_VALIDATION_GRID = 8192
_VALIDATION_TOEPLITZ = 256
_SMIN_FLOOR = 1e-12


@dataclass(frozen=True)
class CovarianceModel:
    """Covariance model of one scalar stationary series.

    Parameters
    ----------
    kind : {"white", "ar1", "custom"}
    rho : complex
        AR(1) coefficient, ``|rho| < 1`` (``kind="ar1"`` only).  The process
        ``y_{n+1} = rho y_n + e_n`` is normalized to unit power.
    r : tuple of complex
        One-sided sequence ``r(0), r(1), ..., r(K)`` (``kind="custom"`` only);
        negative lags follow by Hermitian symmetry and lags beyond ``K`` are 0.
    """

    kind: str = "white"
    rho: complex = 0j
    r: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}, expected one of {KINDS}")
        object.__setattr__(self, "rho", complex(self.rho))
        object.__setattr__(self, "r", tuple(complex(v) for v in self.r))
        if self.kind == "ar1":
            if not abs(self.rho) < 1:
                raise PositivityError(f"AR(1) coefficient must satisfy |rho| < 1, got {self.rho}")
        elif self.kind == "custom":
            self._validate_custom()

    def _validate_custom(self):
        if len(self.r) == 0:
            raise PositivityError("custom covariance sequence is empty")
        if abs(self.r[0].imag) > 1e-12 * max(1.0, abs(self.r[0])) or self.r[0].real <= 0:
            raise PositivityError(f"r(0) must be real and positive, got {self.r[0]}")
        nu = np.arange(_VALIDATION_GRID) / _VALIDATION_GRID
        s = _custom_density(self.r, nu)
        if s.min() <= _SMIN_FLOOR:
            raise PositivityError(
                f"custom spectral density reaches {s.min():.3e} <= 0 on the validation grid"
            )
        size = min(_VALIDATION_TOEPLITZ, 2 * len(self.r) + 2)
        try:
            linalg.cholesky(_toeplitz_from_lags(self, size), lower=True)
        except linalg.LinAlgError as exc:
            raise PositivityError("Toeplitz section of custom sequence is not positive definite") from exc

    @classmethod
    def white(cls):
        return cls("white")

    @classmethod
    def ar1(cls, rho):
        return cls("ar1", rho=rho)

    @classmethod
    def custom(cls, r: Sequence[complex]):
        return cls("custom", r=tuple(r))

    @property
    def support(self):
        """Largest lag with a possibly nonzero covariance (``None`` if unbounded)."""
        if self.kind == "white":
            return 0
        if self.kind == "custom":
            return len(self.r) - 1
        return 0 if self.rho == 0 else None

    def lags(self, k) -> np.ndarray:
        """Covariance ``r(k)`` at arbitrary integer lags (vectorized)."""
        k = np.asarray(k, dtype=np.int64)
        out = np.zeros(k.shape, dtype=complex)
        if self.kind == "white":
            out[k == 0] = 1.0
        elif self.kind == "ar1":
            ak = np.abs(k)
            pos = self.rho ** ak
            out = np.where(k >= 0, pos, np.conj(pos))
        else:
            seq = np.asarray(self.r)
            ak = np.abs(k)
            inside = ak < len(seq)
            vals = seq[np.where(inside, ak, 0)]
            vals = np.where(k >= 0, vals, np.conj(vals))
            out = np.where(inside, vals, 0)
        return np.asarray(out, dtype=complex)

    def to_dict(self):
        if self.kind == "ar1":
            return {"kind": "ar1", "rho": [self.rho.real, self.rho.imag]}
        if self.kind == "custom":
            return {"kind": "custom", "r": [[v.real, v.imag] for v in self.r]}
        return {"kind": "white"}

    @classmethod
    def from_dict(cls, d):
        try:
            kind = d["kind"]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"model entry without 'kind': {d!r}") from exc
        if kind == "white":
            return cls.white()
        if kind == "ar1":
            return cls.ar1(_parse_complex(d.get("rho", 0.0)))
        if kind == "custom":
            return cls.custom([_parse_complex(v) for v in d.get("r", [])])
        raise ParseError(f"unknown model kind {kind!r}")


def _parse_complex(v):
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ParseError(f"complex value must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", "").replace("i", "j"))
    return complex(v)


def _custom_density(r, nu):
    seq = np.asarray(r, dtype=complex)
    k = np.arange(1, len(seq))
    phase = np.exp(-2j * np.pi * np.outer(nu, k))
    return seq[0].real + 2.0 * np.real(phase @ seq[1:])


def _toeplitz_from_lags(model, size):
    col = model.lags(np.arange(size))
    return linalg.toeplitz(col, np.conj(col))


@dataclass
class ModelBank:
    """The M independent series of an experiment, one model per series."""

    models: list = field(default_factory=list)

    def __post_init__(self):
        self.models = list(self.models)
        if len(self.models) < 1:
            raise ValueError("a model bank needs at least one series")
        for mdl in self.models:
            if not isinstance(mdl, CovarianceModel):
                raise TypeError(f"expected CovarianceModel, got {type(mdl).__name__}")

    @classmethod
    def repeat(cls, model, M):
        return cls([model] * int(M))

    @property
    def M(self):
        return len(self.models)

    def __len__(self):
        return len(self.models)

    def __getitem__(self, m):
        return self.models[m]

    def __iter__(self):
        return iter(self.models)

    def groups(self):
        """Map each distinct model to the (sorted) indices of the series using it."""
        out = {}
        for m, mdl in enumerate(self.models):
            out.setdefault(mdl, []).append(m)
        return out

    def is_white(self):
        return all(mdl.kind == "white" for mdl in self.models)

    def to_dict(self):
        distinct = self.groups()
        if len(distinct) == 1:
            (mdl,) = distinct
            return {"repeat": mdl.to_dict(), "M": self.M}
        return {"models": [mdl.to_dict() for mdl in self.models], "M": self.M}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ParseError("model bank document must be a JSON object")
        if "repeat" in d:
            if "M" not in d:
                raise ParseError("'repeat' shorthand requires 'M'")
            return cls.repeat(CovarianceModel.from_dict(d["repeat"]), int(d["M"]))
        if "models" not in d:
            raise ParseError("model bank document needs 'models' or 'repeat'")
        models = [CovarianceModel.from_dict(e) for e in d["models"]]
        if "M" in d and int(d["M"]) != len(models):
            if len(models) == 1:
                models = models * int(d["M"])
            else:
                raise ParseError(f"'M'={d['M']} does not match {len(models)} listed models")
        return cls(models)

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid model bank JSON: {exc}") from exc
        return cls.from_dict(d)


@dataclass
class Ensemble:
    """Samples ``y_{m,n}``, ``m < M``, ``n < N + L - 1`` of an experiment."""

    data: np.ndarray
    M: int
    N: int
    L: int
    seed: int = 0
    rep: int = 0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != (self.M, self.N + self.L - 1):
            raise ValueError(
                f"data shape {self.data.shape} inconsistent with M={self.M}, N={self.N}, L={self.L}"
            )

    @property
    def dims(self):
        return (self.M, self.N, self.L)


def covariance_sequence(model, max_lag):
    """Return ``r(-max_lag), ..., r(max_lag)``."""
    if max_lag < 0:
        raise ValueError("max_lag must be >= 0")
    return model.lags(np.arange(-max_lag, max_lag + 1))


def toeplitz_covariance(model, size):
    """L x L Toeplitz covariance ``R[k, k'] = r(k - k')``.

    Raises
    ------
    PositivityError
        If the matrix fails a Cholesky factorization.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    R = _toeplitz_from_lags(model, size)
    try:
        linalg.cholesky(R, lower=True)
    except linalg.LinAlgError as exc:
        raise PositivityError(f"Toeplitz covariance of size {size} is not positive definite") from exc
    return R


def spectral_density(model, nu):
    """Spectral density on the frequencies ``nu`` (in [0, 1))."""
    nu = np.asarray(nu, dtype=float)
    if model.kind == "white":
        s = np.ones_like(nu)
    elif model.kind == "ar1":
        rho = model.rho
        s = (1 - abs(rho) ** 2) / np.abs(1 - rho * np.exp(-2j * np.pi * nu)) ** 2
    else:
        s = _custom_density(model.r, np.ravel(nu)).reshape(nu.shape)
    if np.any(s <= 0):
        raise PositivityError(f"spectral density not positive (min {np.min(s):.3e})")
    return s


def density_bounds(model, grid_size=4096):
    """``(s_min, s_max)`` of the spectral density on a uniform grid."""
    if model.kind == "ar1":
        # extremes of |1 - rho e^{-2i pi nu}| are 1 -/+ |rho|
        a = abs(model.rho)
        return (1 - a) / (1 + a), (1 + a) / (1 - a)
    s = spectral_density(model, np.arange(grid_size) / grid_size)
    return float(s.min()), float(s.max())


@lru_cache(maxsize=64)
def _cholesky_factor(model, n):
    return linalg.cholesky(toeplitz_covariance(model, n), lower=True)


def series_rng(seed, m, rep=0):
    """Independent generator for series ``m`` of replication ``rep``.

    ``seed`` is an integer or a sequence of integers (the harness keys cells this way).
    """
    entropy = [int(s) for s in seed] if np.ndim(seed) else int(seed)
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=(int(rep), int(m))))


def standard_complex_normal(rng, size):
    """Circular N_C(0, 1) draws: real and imaginary parts iid N(0, 1/2)."""
    z = rng.standard_normal((2,) + tuple(np.atleast_1d(size)))
    return (z[0] + 1j * z[1]) / np.sqrt(2.0)


def ar1_filter(rho, x):
    """Apply the lower Cholesky factor of the unit-power AR(1) Toeplitz covariance to rows of x.

    The factor is the innovations recursion ``y_0 = x_0``,
    ``y_n = rho y_{n-1} + sqrt(1 - |rho|^2) x_n``: it is lower triangular with a
    positive diagonal and reproduces the covariance, so it equals the Cholesky
    factor.  Cost is O(n) per row instead of O(n^3).
    """
    u = np.sqrt(1 - abs(rho) ** 2) * np.asarray(x, dtype=complex)
    u[..., 0] = x[..., 0]
    return signal.lfilter([1.0], [1.0, -rho], u, axis=-1)


def sample_ensemble(bank, N, L, seed, rep=0):
    """Draw the ``M x (N + L - 1)`` sample array of one replication.

    Row ``m`` is ``C_m x_m`` with ``C_m`` the lower Cholesky factor of the
    ``(N + L - 1)`` Toeplitz covariance of series ``m`` and ``x_m`` standard
    circular Gaussian; rows depend only on ``(seed, rep, m)``.  For AR(1)
    models the factor is applied through the equivalent recursion.
    """
    if N < 1 or L < 1:
        raise ValueError("N and L must be >= 1")
    n = N + L - 1
    data = np.empty((bank.M, n), dtype=complex)
    for mdl, idx in bank.groups().items():
        x = np.stack([standard_complex_normal(series_rng(seed, m, rep), n) for m in idx])
        if mdl.kind == "white":
            data[idx] = x
        elif mdl.kind == "ar1":
            data[idx] = ar1_filter(mdl.rho, x)
        else:
            data[idx] = x @ _cholesky_factor(mdl, n).T
    return Ensemble(data, bank.M, N, L, seed=seed, rep=rep)
