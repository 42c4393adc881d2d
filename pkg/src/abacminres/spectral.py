"""Spectral (eigenbasis) representation of a block lower triangular Toeplitz operator."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .transforms import Dst1Plan, dst1_apply

__all__ = [
    "SpectralBlttOperator",
    "AdmissibilityReport",
    "NotSimultaneouslyDiagonalizableError",
    "check_admissible",
    "from_block_sequence",
    "dense_blocks",
    "save_operator_csv",
    "load_operator_csv",
]

log = logging.getLogger(__name__)

DIAG_TOL = 1e-10


class NotSimultaneouslyDiagonalizableError(ValueError):
    """A block is not diagonalized by the supplied spatial transform."""


@dataclass(frozen=True)
class SpectralBlttOperator:
    """BLTT operator stored as its table of block eigenvalues.

    ``block_eigs[i, k]`` is the ``i``-th eigenvalue of block ``A_(k)``, all
    blocks sharing the eigenbasis described by ``spatial_transform``.
    """

    block_eigs: np.ndarray
    spatial_transform: Dst1Plan
    scale_note: str = ""

    def __post_init__(self):
        eigs = np.array(self.block_eigs, dtype=float)
        if eigs.ndim != 2:
            raise ValueError(f"block_eigs must be an M x N table, got shape {eigs.shape}")
        if eigs.shape[0] != self.spatial_transform.size:
            raise ValueError(
                f"table has {eigs.shape[0]} rows but the spatial transform has size {self.spatial_transform.size}"
            )
        if eigs.shape[1] < 1:
            raise ValueError("need at least one time block")
        if not np.all(np.isfinite(eigs)):
            raise ValueError("block eigenvalues must be finite")
        eigs.flags.writeable = False
        object.__setattr__(self, "block_eigs", eigs)

    @property
    def M(self) -> int:
        return self.block_eigs.shape[0]

    @property
    def N(self) -> int:
        return self.block_eigs.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        n = self.M * self.N
        return (n, n)

    @classmethod
    def identity(cls, m: int, N: int, d: int = 1) -> "SpectralBlttOperator":
        plan = Dst1Plan(m, d)
        eigs = np.zeros((plan.size, N))
        eigs[:, 0] = 1.0
        return cls(eigs, plan, scale_note="identity")


@dataclass(frozen=True)
class AdmissibilityReport:
    c0: float
    min_index: int
    admissible: bool


def check_admissible(op: SpectralBlttOperator) -> AdmissibilityReport:
    """Uniform diagonal-dominance margin ``min_i (lam_i^(0) - sum_k>=1 |lam_i^(k)|)``."""
    eigs = op.block_eigs
    margins = eigs[:, 0] - np.abs(eigs[:, 1:]).sum(axis=1)
    i = int(np.argmin(margins))
    c0 = float(margins[i])
    return AdmissibilityReport(c0=c0, min_index=i, admissible=c0 > 0)


def from_block_sequence(blocks, spatial_transform: Dst1Plan, tol: float = DIAG_TOL, scale_note: str = ""):
    """Extract the eigenvalue table from dense symmetric blocks ``A_(0), ..., A_(N-1)``."""
    blocks = [np.asarray(b, dtype=float) for b in blocks]
    if not blocks:
        raise ValueError("at least one block is required")
    M = spatial_transform.size
    eigs = np.empty((M, len(blocks)))
    for k, b in enumerate(blocks):
        if b.shape != (M, M):
            raise ValueError(f"block {k} has shape {b.shape}, expected {(M, M)}")
        scale = np.linalg.norm(b)
        if np.linalg.norm(b - b.T) > tol * max(scale, 1.0):
            raise ValueError(f"block {k} is not symmetric")
        # U^T B U, U symmetric: transform rows then columns
        t = dst1_apply(spatial_transform, dst1_apply(spatial_transform, b).T).T
        diag = np.diag(t).copy()
        off = np.linalg.norm(t - np.diag(diag))
        if scale > 0 and off > tol * scale:
            raise NotSimultaneouslyDiagonalizableError(
                f"block {k}: off-diagonal residue {off / scale:.3e} exceeds {tol:.1e} in the transform basis"
            )
        eigs[:, k] = diag
    return SpectralBlttOperator(eigs, spatial_transform, scale_note=scale_note)


def dense_blocks(op: SpectralBlttOperator) -> list[np.ndarray]:
    """Dense ``A_(k) = U diag(lam^(k)) U^T`` for every k (diagnostic use)."""
    U = op.spatial_transform.matrix()
    return [(U * op.block_eigs[:, k]) @ U.T for k in range(op.N)]


def save_operator_csv(op: SpectralBlttOperator, path) -> None:
    """Columnar dump: header with m, d, M, N then one row per (i, k) entry."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "d", "M", "N"])
        w.writerow([op.spatial_transform.m, op.spatial_transform.d, op.M, op.N])
        w.writerow(["i", "k", "lambda"])
        for i in range(op.M):
            for k in range(op.N):
                w.writerow([i, k, repr(float(op.block_eigs[i, k]))])


def load_operator_csv(path) -> SpectralBlttOperator:
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        next(r)
        m, d, M, N = (int(x) for x in next(r))
        next(r)
        eigs = np.full((M, N), np.nan)
        for row in r:
            eigs[int(row[0]), int(row[1])] = float(row[2])
    if np.isnan(eigs).any():
        raise ValueError(f"{path}: incomplete eigenvalue table")
    return SpectralBlttOperator(eigs, Dst1Plan(m, d), scale_note=f"loaded from {path}")
