"""Orthogonal/unitary transform kernels.

DFT convention, used everywhere in the package: with the unitary matrix
``F = (1/sqrt(N)) [theta^((i-1)(j-1))]``, ``theta = exp(2*pi*i/N)``,

* ``dft_forward(v) = F^* v``  (numpy's ``fft`` kernel, orthonormal scaling)
* ``dft_inverse(v) = F v``

so ``sqrt(N) * dft_forward(c)`` is the plain unnormalized FFT of ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

__all__ = [
    "DftPlan",
    "Dst1Plan",
    "AlphaScaling",
    "dft_forward",
    "dft_inverse",
    "dst1_apply",
    "dst1_apply_via_fft",
    "dst1_matrix",
    "kron_reorder",
    "TO_MODE_MAJOR",
    "TO_TIME_MAJOR",
]

TO_MODE_MAJOR = "to_mode_major"
TO_TIME_MAJOR = "to_time_major"


@dataclass(frozen=True)
class DftPlan:
    """Unitary DFT of fixed length ``length``."""

    length: int

    def __post_init__(self):
        if int(self.length) != self.length or self.length < 1:
            raise ValueError(f"DFT length must be a positive integer, got {self.length!r}")

    @property
    def normalization(self) -> float:
        return 1.0 / np.sqrt(self.length)

    def matrix(self) -> np.ndarray:
        """Dense ``F`` (not ``F^*``); only meant for small oracle checks."""
        n = self.length
        idx = np.arange(n)
        return np.exp(2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)


@dataclass(frozen=True)
class Dst1Plan:
    """Orthonormal DST-I on an ``m**d`` tensor grid (lexicographic order)."""

    m: int
    d: int = 1

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")
        if self.d not in (1, 2):
            raise ValueError(f"only d = 1 or 2 spatial dimensions are supported, got {self.d!r}")

    @property
    def size(self) -> int:
        return self.m**self.d

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return (self.m,) * self.d

    def matrix(self) -> np.ndarray:
        """Dense ``U`` of order ``m**d`` (symmetric and orthogonal)."""
        s = dst1_matrix(self.m)
        return s if self.d == 1 else np.kron(s, s)


@dataclass(frozen=True)
class AlphaScaling:
    """Diagonal of ``D_alpha = diag(alpha**((j-1)/N))`` and its inverse."""

    alpha: float
    length: int
    diag: np.ndarray = field(init=False, repr=False, compare=False)
    inv_diag: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if int(self.length) != self.length or self.length < 1:
            raise ValueError(f"length must be a positive integer, got {self.length!r}")
        # exp/log form keeps the tiny-alpha entries reproducible across platforms
        expo = np.arange(self.length) / self.length * np.log(self.alpha)
        diag = np.exp(expo)
        inv_diag = np.exp(-expo)
        diag.flags.writeable = False
        inv_diag.flags.writeable = False
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "inv_diag", inv_diag)


def _check_last_axis(v: np.ndarray, n: int, what: str) -> None:
    if v.ndim == 0 or v.shape[-1] != n:
        raise ValueError(f"{what}: expected trailing length {n}, got shape {v.shape}")


def dft_forward(plan: DftPlan, v, axis: int = -1) -> np.ndarray:
    """Return ``F^* v`` along ``axis`` (batched over the other axes)."""
    v = np.asarray(v)
    _check_last_axis(np.moveaxis(v, axis, -1), plan.length, "dft_forward")
    return sfft.fft(v, axis=axis, norm="ortho")


def dft_inverse(plan: DftPlan, v, axis: int = -1) -> np.ndarray:
    """Return ``F v`` along ``axis``; exact inverse of :func:`dft_forward`."""
    v = np.asarray(v)
    _check_last_axis(np.moveaxis(v, axis, -1), plan.length, "dft_inverse")
    return sfft.ifft(v, axis=axis, norm="ortho")


def dst1_matrix(m: int) -> np.ndarray:
    """Orthonormal sine matrix ``sqrt(2/(m+1)) sin(p q pi/(m+1))``, p, q = 1..m."""
    k = np.arange(1, m + 1)
    return np.sqrt(2.0 / (m + 1)) * np.sin(np.pi * np.outer(k, k) / (m + 1))


def dst1_apply(plan: Dst1Plan, v) -> np.ndarray:
    """Multiply by ``U`` (= ``U^T`` = ``U^{-1}``).

    ``v`` has trailing length ``m**d``; leading axes are treated as a batch,
    so a time-major ``(N, M)`` array transforms every time slice at once.
    """
    v = np.asarray(v)
    _check_last_axis(v, plan.size, "dst1_apply")
    batch = v.shape[:-1]
    grid = v.reshape(batch + plan.grid_shape)
    axes = tuple(range(len(batch), len(batch) + plan.d))
    out = sfft.dstn(grid, type=1, axes=axes, norm="ortho")
    return out.reshape(v.shape)


def _dst1_fft_1d(x: np.ndarray, axis: int) -> np.ndarray:
    x = np.moveaxis(x, axis, -1)
    m = x.shape[-1]
    ext = np.zeros(x.shape[:-1] + (2 * (m + 1),), dtype=x.dtype)
    ext[..., 1 : m + 1] = x
    ext[..., m + 2 :] = -x[..., ::-1]
    # odd extension: DFT is -2i * sum x_n sin(pi k n / (m+1))
    y = -np.fft.fft(ext, axis=-1)[..., 1 : m + 1].imag / 2.0
    y *= np.sqrt(2.0 / (m + 1))
    return np.moveaxis(y, -1, axis)


def dst1_apply_via_fft(plan: Dst1Plan, v) -> np.ndarray:
    """Same as :func:`dst1_apply` but through a length ``2(m+1)`` odd-extension FFT."""
    v = np.asarray(v, dtype=float)
    _check_last_axis(v, plan.size, "dst1_apply_via_fft")
    batch = v.shape[:-1]
    grid = v.reshape(batch + plan.grid_shape)
    for ax in range(len(batch), len(batch) + plan.d):
        grid = _dst1_fft_1d(grid, ax)
    return grid.reshape(v.shape)


def kron_reorder(v, M: int, N: int, direction: str) -> np.ndarray:
    """Permute between time-major (N blocks of M) and mode-major (M blocks of N).

    ``to_mode_major`` applies ``Pi^T``, ``to_time_major`` applies ``Pi``.
    """
    v = np.asarray(v)
    if v.ndim != 1 or v.size != M * N:
        raise ValueError(f"kron_reorder: vector of length {M * N} expected for M={M}, N={N}, got shape {v.shape}")
    if direction == TO_MODE_MAJOR:
        return np.ascontiguousarray(v.reshape(N, M).T).reshape(-1)
    if direction == TO_TIME_MAJOR:
        return np.ascontiguousarray(v.reshape(M, N).T).reshape(-1)
    raise ValueError(f"unknown direction {direction!r}")
