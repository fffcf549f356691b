"""Block-structured Hermitian matrices with M diagonal blocks of size L."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

HERMITIAN_RTOL = 1e-12


@dataclass
class BlockHermitian:
    """An ``ML x ML`` Hermitian matrix viewed as an M x M grid of L x L blocks."""

    matrix: np.ndarray
    M: int
    L: int

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix)
        n = self.M * self.L
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match M={self.M}, L={self.L}")

    @property
    def dims(self):
        return (self.M, self.L)

    def block(self, m, m2=None):
        m2 = m if m2 is None else m2
        L = self.L
        return self.matrix[m * L:(m + 1) * L, m2 * L:(m2 + 1) * L]

    def diagonal_blocks(self):
        return [self.block(m) for m in range(self.M)]

    def hermitian_defect(self):
        A = self.matrix
        scale = max(np.abs(A).max(), 1e-300)
        return float(np.abs(A - A.conj().T).max() / scale)

    def is_hermitian(self, rtol=HERMITIAN_RTOL):
        return self.hermitian_defect() <= rtol

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def bdiag(A, L):
    """Zero every off-diagonal L x L block of ``A`` (Bdiag operator)."""
    if isinstance(A, BlockHermitian):
        return BlockHermitian(bdiag(A.matrix, A.L), A.M, A.L)
    A = np.asarray(A)
    n = A.shape[0]
    if n % L:
        raise ValueError(f"size {n} is not a multiple of L={L}")
    out = np.zeros_like(A)
    for s in range(0, n, L):
        out[s:s + L, s:s + L] = A[s:s + L, s:s + L]
    return out


def diagonal_blocks(A, L):
    A = np.asarray(A)
    return [A[s:s + L, s:s + L] for s in range(0, A.shape[0], L)]


def assemble_block_diagonal(blocks):
    return linalg.block_diag(*blocks)


def hermitize(A):
    return 0.5 * (A + A.conj().T)
