"""Fast matvecs with a BLTT matrix and its time-reversed (symmetric) form.

All vectors are time-major at the API boundary: entry ``n*M + j`` is spatial
unknown ``j`` at time step ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp

from .spectral import SpectralBlttOperator
from .transforms import dst1_apply

__all__ = [
    "TimeReversal",
    "SparseBlttOperator",
    "bltt_matvec",
    "time_reverse",
    "symmetrized_matvec",
    "lower_toeplitz_matvec",
    "operator_matvec",
]


def _symbol_fft(symbols: np.ndarray) -> np.ndarray:
    n = symbols.shape[-1]
    return sfft.rfft(symbols, n=2 * n, axis=-1)


def lower_toeplitz_matvec(symbol_fft: np.ndarray, x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Lower triangular Toeplitz product along ``axis`` via a zero-padded 2N circulant.

    ``symbol_fft`` is ``rfft(symbol, 2N)`` broadcastable against the transformed ``x``.
    """
    n = x.shape[axis]
    xf = sfft.rfft(x, n=2 * n, axis=axis)
    y = sfft.irfft(xf * symbol_fft, n=2 * n, axis=axis)
    return np.take(y, np.arange(n), axis=axis)


@dataclass(frozen=True)
class TimeReversal:
    """The permutation ``Y_N kron I_M``; it is its own inverse."""

    M: int
    N: int

    def __call__(self, v) -> np.ndarray:
        return time_reverse(v, self.M, self.N)


def time_reverse(v, M: int, N: int) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim != 1 or v.size != M * N:
        raise ValueError(f"time_reverse: expected length {M * N}, got shape {v.shape}")
    return v.reshape(N, M)[::-1].reshape(-1).copy()


def _spectral_symbol_fft(op: SpectralBlttOperator) -> np.ndarray:
    # the operator is immutable, so the transformed symbols are memoized on it
    cached = op.__dict__.get("_symbol_fft")
    if cached is None:
        cached = _symbol_fft(op.block_eigs)
        op.__dict__["_symbol_fft"] = cached
    return cached


def bltt_matvec(op: SpectralBlttOperator, v) -> np.ndarray:
    """``A v`` through the eigenbasis: DST, per-mode Toeplitz-by-FFT, DST back."""
    v = np.asarray(v, dtype=float)
    M, N = op.M, op.N
    if v.ndim != 1 or v.size != M * N:
        raise ValueError(f"bltt_matvec: expected length {M * N}, got shape {v.shape}")
    plan = op.spatial_transform
    modes = dst1_apply(plan, v.reshape(N, M))  # (N, M), row n holds U^T v_n
    y = lower_toeplitz_matvec(_spectral_symbol_fft(op).T, modes, axis=0)
    return dst1_apply(plan, y).reshape(-1)


@dataclass(frozen=True)
class SparseBlttOperator:
    """BLTT matrix with blocks ``A_(k) = s_k I + t_k K`` for a sparse symmetric ``K``.

    Covers every in-scope discretization: for instance heat CN has
    ``s = (1, -1)/tau`` and ``t = (-1/2, -1/2)`` with ``K`` the (variable
    coefficient) Laplacian, and the L1 scheme has ``s = l_k / tau**gamma`` and
    ``t = (-1, 0, ..., 0)``.
    """

    identity_symbol: np.ndarray
    stiffness_symbol: np.ndarray
    stiffness: sp.spmatrix
    note: str = ""

    def __post_init__(self):
        s = np.asarray(self.identity_symbol, dtype=float)
        t = np.asarray(self.stiffness_symbol, dtype=float)
        if s.ndim != 1 or s.shape != t.shape:
            raise ValueError("identity and stiffness symbols must be 1-D of equal length")
        K = sp.csr_matrix(self.stiffness)
        if K.shape[0] != K.shape[1]:
            raise ValueError("stiffness matrix must be square")
        object.__setattr__(self, "identity_symbol", s)
        object.__setattr__(self, "stiffness_symbol", t)
        object.__setattr__(self, "stiffness", K)

    @property
    def M(self) -> int:
        return self.stiffness.shape[0]

    @property
    def N(self) -> int:
        return self.identity_symbol.size

    @property
    def shape(self) -> tuple[int, int]:
        n = self.M * self.N
        return (n, n)

    @cached_property
    def _ffts(self):
        return _symbol_fft(self.identity_symbol)[:, None], _symbol_fft(self.stiffness_symbol)[:, None]

    def block(self, k: int) -> sp.csr_matrix:
        return (self.identity_symbol[k] * sp.identity(self.M, format="csr") + self.stiffness_symbol[k] * self.stiffness).tocsr()

    def matvec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        M, N = self.M, self.N
        if v.ndim != 1 or v.size != M * N:
            raise ValueError(f"matvec: expected length {M * N}, got shape {v.shape}")
        V = v.reshape(N, M)
        KV = (self.stiffness @ V.T).T
        s_f, t_f = self._ffts
        y = lower_toeplitz_matvec(s_f, V, axis=0) + lower_toeplitz_matvec(t_f, KV, axis=0)
        return y.reshape(-1)


def operator_matvec(op, v) -> np.ndarray:
    """``A v`` for either operator representation."""
    if isinstance(op, SpectralBlttOperator):
        return bltt_matvec(op, v)
    return op.matvec(v)


def symmetrized_matvec(op, v) -> np.ndarray:
    """``Y A v``; the induced matrix is symmetric because every block is."""
    return time_reverse(operator_matvec(op, v), op.M, op.N)
