"""Absolute-value block alpha-circulant (ABAC) preconditioner.

The block alpha-circulant approximation ``C_alpha`` of a BLTT operator splits,
in the spatial eigenbasis, into ``M`` scalar alpha-circulant matrices that are
all diagonalized by ``D_alpha^{-1} F``.  The preconditioner is
``P_alpha = (C_alpha^{1/2})^* C_alpha^{1/2}`` with the principal square root
taken eigenvalue by eigenvalue, and it is only ever applied through its
inverse ``C_alpha^{-1/2} (C_alpha^{-1/2})^*``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .spectral import SpectralBlttOperator, check_admissible
from .transforms import AlphaScaling, DftPlan, Dst1Plan, dst1_apply

__all__ = [
    "AlphaCirculantSpectrum",
    "AbacPreconditioner",
    "SingularPreconditionerError",
    "NumericalBreakdownError",
    "build_alpha_spectrum",
    "sqrt_spectrum",
    "build_preconditioner",
    "apply_half_inverse_adjoint",
    "apply_half_inverse",
    "apply_preconditioner_inverse",
]

log = logging.getLogger(__name__)

IMAG_SOFT_TOL = 1e-11
IMAG_HARD_TOL = 1e-8


class SingularPreconditionerError(ArithmeticError):
    """An alpha-circulant eigenvalue is zero or sits on the negative real axis."""


class NumericalBreakdownError(ArithmeticError):
    """A half-inverse that must be real came out with a large imaginary part."""


@dataclass(frozen=True)
class AlphaCirculantSpectrum:
    """``eigs[i, k]``: k-th eigenvalue of the alpha-circulant block of mode i."""

    alpha: float
    eigs: np.ndarray
    scaling: AlphaScaling

    @property
    def M(self) -> int:
        return self.eigs.shape[0]

    @property
    def N(self) -> int:
        return self.eigs.shape[1]

    def conjugate_symmetry_residue(self) -> float:
        """Relative size of ``eigs[:, k] - conj(eigs[:, N-k])`` over all k."""
        mirrored = np.conj(np.roll(self.eigs[:, ::-1], 1, axis=1))
        scale = np.abs(self.eigs).max()
        return float(np.abs(self.eigs - mirrored).max() / scale) if scale > 0 else 0.0


@dataclass(frozen=True)
class AbacPreconditioner:
    spectrum: AlphaCirculantSpectrum
    sqrt_eigs: np.ndarray
    spatial_transform: Dst1Plan
    dft: DftPlan

    @property
    def alpha(self) -> float:
        return self.spectrum.alpha

    @property
    def M(self) -> int:
        return self.sqrt_eigs.shape[0]

    @property
    def N(self) -> int:
        return self.sqrt_eigs.shape[1]

    def __call__(self, y) -> np.ndarray:
        return apply_preconditioner_inverse(self, y)


def build_alpha_spectrum(op: SpectralBlttOperator, alpha: float) -> AlphaCirculantSpectrum:
    """Eigenvalues ``sum_j lam_i^(j-1) alpha^((j-1)/N) theta^(-(k-1)(j-1))`` for every mode."""
    alpha = float(alpha)
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    scaling = AlphaScaling(alpha, op.N)
    eigs = sfft.fft(op.block_eigs * scaling.diag, axis=1)
    return AlphaCirculantSpectrum(alpha, eigs, scaling)


def sqrt_spectrum(spec: AlphaCirculantSpectrum, spatial_transform: Dst1Plan | None = None) -> AbacPreconditioner:
    """Principal-branch square root of every eigenvalue."""
    eigs = spec.eigs
    bad = (np.abs(eigs) == 0) | ((eigs.imag == 0) & (eigs.real <= 0))
    if bad.any():
        i, k = np.argwhere(bad)[0]
        raise SingularPreconditionerError(
            f"eigenvalue {eigs[i, k]} (mode {i}, frequency {k}) lies on the closed negative real axis; "
            "the operator violates the diagonal dominance assumption"
        )
    roots = np.sqrt(eigs.astype(complex))
    if spatial_transform is None:
        spatial_transform = _plan_for(spec.M)
    return AbacPreconditioner(spec, roots, spatial_transform, DftPlan(spec.N))


def _plan_for(M: int) -> Dst1Plan:
    m = int(round(np.sqrt(M)))
    return Dst1Plan(m, 2) if m * m == M and M > 1 else Dst1Plan(M, 1)


def build_preconditioner(op: SpectralBlttOperator, alpha: float) -> AbacPreconditioner:
    """Spectrum, square roots and transform handles for ``P_alpha``; warns if ``c0 <= 0``."""
    report = check_admissible(op)
    if not report.admissible:
        log.warning(
            "operator is not admissible (c0 = %.3e at mode %d); the preconditioner may be singular",
            report.c0,
            report.min_index,
        )
    return sqrt_spectrum(build_alpha_spectrum(op, alpha), op.spatial_transform)


def _as_time_major(prec: AbacPreconditioner, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size != prec.M * prec.N:
        raise ValueError(f"expected a vector of length {prec.M * prec.N}, got shape {v.shape}")
    return v.reshape(prec.N, prec.M)


def _real_part(w: np.ndarray) -> np.ndarray:
    re = w.real
    scale = np.linalg.norm(re)
    resid = np.linalg.norm(w.imag) / scale if scale > 0 else np.linalg.norm(w.imag)
    if resid > IMAG_HARD_TOL:
        raise NumericalBreakdownError(f"imaginary residue {resid:.2e} exceeds {IMAG_HARD_TOL:.0e}")
    if resid > IMAG_SOFT_TOL:
        log.debug("imaginary residue %.2e above the %.0e soft threshold", resid, IMAG_SOFT_TOL)
    return re


def apply_half_inverse_adjoint(prec: AbacPreconditioner, y) -> np.ndarray:
    """``(C_alpha^{-1/2})^* y``."""
    Y = _as_time_major(prec, y)
    plan = prec.spatial_transform
    d = prec.spectrum.scaling
    # step 1: spatial transform; axis 0 of the (N, M) array is each mode's time series
    modes = dst1_apply(plan, Y)
    # step 2: D F conj(Lambda)^{-1/2} F^* D^{-1}, mode by mode
    w = sfft.fft(modes * d.inv_diag[:, None], axis=0, norm="ortho")
    w /= np.conj(prec.sqrt_eigs.T)
    w = sfft.ifft(w, axis=0, norm="ortho") * d.diag[:, None]
    # step 3: back to physical space
    return dst1_apply(plan, _real_part(w)).reshape(-1)


def apply_half_inverse(prec: AbacPreconditioner, z) -> np.ndarray:
    """``C_alpha^{-1/2} z`` (real by construction up to rounding)."""
    Z = _as_time_major(prec, z)
    plan = prec.spatial_transform
    d = prec.spectrum.scaling
    modes = dst1_apply(plan, Z)
    w = sfft.fft(modes * d.diag[:, None], axis=0, norm="ortho")
    w /= prec.sqrt_eigs.T
    w = sfft.ifft(w, axis=0, norm="ortho") * d.inv_diag[:, None]
    return dst1_apply(plan, _real_part(w)).reshape(-1)


def apply_preconditioner_inverse(prec: AbacPreconditioner, y) -> np.ndarray:
    """``P_alpha^{-1} y = C_alpha^{-1/2} (C_alpha^{-1/2})^* y``."""
    return apply_half_inverse(prec, apply_half_inverse_adjoint(prec, y))
