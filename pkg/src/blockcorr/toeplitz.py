"""Toeplitzification operators tau, Psi_K^(m), Psi and Psi-bar.

For an R x R matrix ``A``, ``tau(A)(l) = Tr(A J^l) / R`` is the normalized sum
of the entries ``A[i, j]`` with ``i - j = l``; ``J`` is the shift with ones on
the first upper diagonal and ``J^{-1} = J^T``.  ``Psi_K^(m)(A)`` is the K x K
Toeplitz matrix whose coefficient at offset ``n = i - j`` is the convolution
``sum_l r_m(n - l) tau(A)(l)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, signal

from .blocks import BlockHermitian, assemble_block_diagonal, diagonal_blocks
from .errors import GridError

# Above this size the convolution goes through the FFT.
DIRECT_CONV_MAX = 512


@dataclass
class ToeplitzSymbol:
    """Coefficients ``c(-(K-1)), ..., c(K-1)`` of a K x K Toeplitz matrix."""

    coeffs: np.ndarray
    K: int

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (2 * self.K - 1,):
            raise ValueError("need 2K - 1 coefficients")

    def __call__(self, n):
        return self.coeffs[np.asarray(n) + self.K - 1]

    def is_hermitian(self, atol=1e-12):
        return np.allclose(self.coeffs, np.conj(self.coeffs[::-1]), atol=atol)

    def matrix(self):
        return toeplitz_from_coeffs(self.coeffs, self.K)


def shift_matrix(K, power=1):
    """``J_K^power``; negative powers are powers of the transpose."""
    return np.eye(K, k=power)


def toeplitz_from_coeffs(coeffs, K):
    """K x K matrix with entry ``(i, j) = coeffs[i - j + K - 1]``."""
    coeffs = np.asarray(coeffs)
    return linalg.toeplitz(coeffs[K - 1:], coeffs[K - 1::-1])


def tau_sequence(A):
    """``tau(A)(l)`` for ``l = -(R-1), ..., R-1`` as an array of length 2R - 1."""
    A = np.asarray(A)
    R = A.shape[0]
    if A.shape != (R, R):
        raise ValueError("tau needs a square matrix")
    i, j = np.indices((R, R))
    idx = (i - j + R - 1).ravel()
    flat = A.ravel()
    out = np.bincount(idx, weights=flat.real, minlength=2 * R - 1).astype(complex)
    if np.iscomplexobj(A):
        out += 1j * np.bincount(idx, weights=flat.imag, minlength=2 * R - 1)
    return out / R


def tau(A, l):
    """``(1/R) Tr(A J_R^l)``."""
    R = np.shape(A)[0]
    if abs(l) > R - 1:
        raise ValueError(f"|l| must be <= {R - 1}")
    return np.trace(np.asarray(A), offset=-l) / R


def _convolve(a, b):
    if min(len(a), len(b)) <= DIRECT_CONV_MAX:
        return np.convolve(a, b)
    return signal.fftconvolve(a, b)


def psi_coeffs_from_tau(model, tau_seq, K, method="auto"):
    """Coefficients ``c(n) = sum_l r(n - l) tau(l)``, ``|n| <= K - 1``.

    ``tau_seq`` holds ``tau(l)`` for ``l = -(R-1), ..., R-1``.
    """
    tau_seq = np.asarray(tau_seq, dtype=complex)
    R = (len(tau_seq) + 1) // 2
    if model.kind == "white":
        out = np.zeros(2 * K - 1, dtype=complex)
        lo = max(-(K - 1), -(R - 1))
        hi = min(K - 1, R - 1)
        out[lo + K - 1:hi + K] = tau_seq[lo + R - 1:hi + R]
        return out
    span = K + R - 2
    r = model.lags(np.arange(-span, span + 1))
    if method == "direct":
        conv = np.convolve(r, tau_seq)
    elif method == "fft":
        conv = signal.fftconvolve(r, tau_seq)
    else:
        conv = _convolve(r, tau_seq)
    start = span + R - 1 - (K - 1)
    return conv[start:start + 2 * K - 1]


def psi_m(model, A, K, method="auto"):
    """``Psi_K^(m)(A)`` for the covariance model of series m."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return toeplitz_from_coeffs(psi_coeffs_from_tau(model, tau_sequence(A), K, method), K)


def psi_block_list(bank, A, L):
    """Diagonal blocks of ``Psi(A)``; equal models share one array."""
    t = tau_sequence(A)
    blocks = [None] * bank.M
    for mdl, idx in bank.groups().items():
        B = psi_m_from_tau(mdl, t, L)
        for m in idx:
            blocks[m] = B
    return blocks


def psi_m_from_tau(model, tau_seq, K):
    return toeplitz_from_coeffs(psi_coeffs_from_tau(model, tau_seq, K), K)


def psi_block(bank, A, L):
    """Block-diagonal ``ML x ML`` matrix with m-th block ``Psi_L^(m)(A)``."""
    return BlockHermitian(assemble_block_diagonal(psi_block_list(bank, A, L)), bank.M, L)


def psi_bar_from_blocks(bank, blocks, N):
    """``(1/M) sum_m Psi_N^(m)(blocks[m])``."""
    coeffs = np.zeros(2 * N - 1, dtype=complex)
    for mdl, idx in bank.groups().items():
        t = sum(tau_sequence(blocks[m]) for m in idx)
        coeffs += psi_coeffs_from_tau(mdl, t, N)
    return toeplitz_from_coeffs(coeffs / bank.M, N)


def psi_bar(bank, A, N):
    """``Psi-bar(A)``: average of ``Psi_N^(m)`` over the diagonal blocks of A."""
    if isinstance(A, BlockHermitian):
        A = A.matrix
    A = np.asarray(A)
    L = A.shape[0] // bank.M
    if L * bank.M != A.shape[0]:
        raise ValueError(f"matrix size {A.shape[0]} not divisible by M={bank.M}")
    return psi_bar_from_blocks(bank, diagonal_blocks(A, L), N)


def symbol_coefficients(values, max_lag):
    """Trapezoid Fourier coefficients ``int s(nu) e^{2i pi nu n} dnu`` for ``|n| <= max_lag``.

    ``values`` samples the symbol on ``nu_g = g / G``.
    """
    values = np.asarray(values)
    G = len(values)
    c = np.fft.ifft(values)
    n = np.arange(-max_lag, max_lag + 1)
    return c[n % G]


def toeplitz_from_symbol(symbol, K, grid_size=None):
    """K x K Toeplitz matrix ``int s(nu) d_K(nu) d_K(nu)^H dnu``.

    ``symbol`` is a callable of the frequency array or an array of samples on
    the uniform grid.  Entry ``(i, j)`` is the Fourier coefficient at ``i - j``.

    Raises
    ------
    GridError
        If the grid has fewer than ``4K`` points.
    """
    if callable(symbol):
        if grid_size is None:
            grid_size = max(4096, 4 * K)
        values = symbol(np.arange(grid_size) / grid_size)
    else:
        values = np.asarray(symbol)
        grid_size = len(values)
    if grid_size < 4 * K:
        raise GridError(f"grid of {grid_size} points is too coarse for K={K} (need >= {4 * K})")
    return toeplitz_from_coeffs(symbol_coefficients(values, K - 1), K)
