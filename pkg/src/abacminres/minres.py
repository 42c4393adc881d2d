"""Preconditioned MINRES for symmetric (indefinite) systems with an SPD preconditioner.

The Lanczos/Givens recurrences follow Paige & Saunders.  Besides the
iterate, the solver carries ``b - A x_k`` and ``P^{-1}(b - A x_k)`` along by
the same short recurrences, so every residual convention can be monitored
exactly without extra operator or preconditioner applications.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "MinresConfig",
    "MinresReport",
    "ContractViolationError",
    "NotSPDError",
    "solve",
    "RESIDUAL_CONVENTIONS",
]

PRECONDITIONED_RELATIVE = "preconditioned-relative"
PRECONDITIONED_ABSOLUTE = "preconditioned-absolute"
TRUE_RELATIVE = "true-relative"
ENERGY_RELATIVE = "energy-relative"
RESIDUAL_CONVENTIONS = (PRECONDITIONED_RELATIVE, PRECONDITIONED_ABSOLUTE, TRUE_RELATIVE, ENERGY_RELATIVE)

SYMMETRY_PROBE_TOL = 1e-8


class ContractViolationError(ValueError):
    """The supplied matvec failed the symmetry probe."""


class NotSPDError(ValueError):
    """The preconditioner produced a non-positive ``<P^{-1} v, v>``."""


@dataclass(frozen=True)
class MinresConfig:
    tol: float = 1e-6
    max_iter: int = 1000
    residual_convention: str = TRUE_RELATIVE
    record_history: bool = True
    check_symmetry: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol!r}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter!r}")
        if self.residual_convention not in RESIDUAL_CONVENTIONS:
            raise ValueError(
                f"unknown residual convention {self.residual_convention!r}; choose from {RESIDUAL_CONVENTIONS}"
            )


@dataclass
class MinresReport:
    iterations: int
    converged: bool
    residual_history: list[float] = field(default_factory=list)
    final_true_residual: float = float("nan")  # ||b - A x|| / ||b||, recomputed at exit
    final_preconditioned_residual: float = float("nan")  # relative, from the recurrence
    wall_time: float = 0.0
    breakdown: bool = False
    convention: str = TRUE_RELATIVE


def _probe_symmetry(matvec, n: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(n)
    v = rng.standard_normal(n)
    Au, Av = matvec(u), matvec(v)
    lhs, rhs = float(Au @ v), float(u @ Av)
    scale = np.linalg.norm(Au) * np.linalg.norm(v) + np.linalg.norm(u) * np.linalg.norm(Av)
    if abs(lhs - rhs) > SYMMETRY_PROBE_TOL * max(scale, np.finfo(float).tiny):
        raise ContractViolationError(
            f"matvec does not look symmetric: <Au,v> = {lhs:.6e} but <u,Av> = {rhs:.6e}"
        )


def solve(
    matvec: Callable[[np.ndarray], np.ndarray],
    prec_inv: Callable[[np.ndarray], np.ndarray] | None,
    rhs,
    cfg: MinresConfig | None = None,
    x0=None,
) -> tuple[np.ndarray, MinresReport]:
    """Solve ``A x = rhs`` by MINRES preconditioned with ``P`` (given as ``P^{-1}``).

    Non-convergence within ``cfg.max_iter`` is reported, not raised.
    """
    cfg = cfg or MinresConfig()
    b = np.asarray(rhs, dtype=float).reshape(-1)
    n = b.size
    apply_p = prec_inv if prec_inv is not None else (lambda r: r.copy())
    eps = np.finfo(float).eps

    if cfg.check_symmetry:
        _probe_symmetry(matvec, n, cfg.seed)

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float).reshape(-1)
    r1 = b - matvec(x) if x0 is not None else b.copy()
    y = apply_p(r1)
    beta1 = float(r1 @ y)
    if beta1 < 0 or (beta1 == 0 and np.any(r1)):
        raise NotSPDError(f"<P^-1 r0, r0> = {beta1:.3e} is not positive; preconditioner is not SPD")

    b_norm = np.linalg.norm(b)
    pb = y if x0 is None else apply_p(b)
    pb_norm = np.linalg.norm(pb)
    true_res = r1.copy()
    prec_res = y.copy()

    energy = [1.0]

    def monitored() -> float:
        if cfg.residual_convention == ENERGY_RELATIVE:
            return energy[0]
        if cfg.residual_convention == TRUE_RELATIVE:
            return np.linalg.norm(true_res) / b_norm if b_norm > 0 else np.linalg.norm(true_res)
        val = np.linalg.norm(prec_res)
        if cfg.residual_convention == PRECONDITIONED_RELATIVE and pb_norm > 0:
            val /= pb_norm
        return float(val)

    report = MinresReport(iterations=0, converged=False, convention=cfg.residual_convention)
    t0 = time.perf_counter()

    if beta1 == 0 or monitored() <= cfg.tol:
        report.converged = True
    else:
        beta1 = np.sqrt(beta1)
        oldb, beta = 0.0, beta1
        dbar = epsln = 0.0
        phibar = beta1
        cs, sn = -1.0, 0.0
        r2 = r1
        w = np.zeros(n)
        w2 = np.zeros(n)
        Aw = np.zeros(n)
        Aw2 = np.zeros(n)
        PAw = np.zeros(n)
        PAw2 = np.zeros(n)
        v_prev = np.zeros(n)

        for itn in range(1, cfg.max_iter + 1):
            v = y / beta
            Av = matvec(v)
            y = Av.copy()
            if itn >= 2:
                y -= (beta / oldb) * r1
            alfa = float(v @ y)
            y -= (alfa / beta) * r2
            r1, r2 = r2, y
            y = apply_p(r2)
            oldb = beta
            beta_sq = float(r2 @ y)
            if beta_sq < 0:
                raise NotSPDError(f"<P^-1 v, v> = {beta_sq:.3e} < 0 at iteration {itn}; preconditioner is not SPD")
            beta = np.sqrt(beta_sq)
            # P^-1 A v from the three-term Lanczos relation
            PAv = y + alfa * v + (oldb * v_prev if itn >= 2 else 0.0)

            oldeps = epsln
            delta = cs * dbar + sn * alfa
            gbar = sn * dbar - cs * alfa
            epsln = sn * beta
            dbar = -cs * beta
            gamma = max(np.hypot(gbar, beta), eps)
            cs, sn = gbar / gamma, beta / gamma
            phi = cs * phibar
            phibar = sn * phibar

            w1, w2 = w2, w
            w = (v - oldeps * w1 - delta * w2) / gamma
            Aw1, Aw2 = Aw2, Aw
            Aw = (Av - oldeps * Aw1 - delta * Aw2) / gamma
            PAw1, PAw2 = PAw2, PAw
            PAw = (PAv - oldeps * PAw1 - delta * PAw2) / gamma

            x += phi * w
            true_res -= phi * Aw
            prec_res -= phi * PAw
            v_prev = v
            energy[0] = phibar / beta1

            res = monitored()
            report.iterations = itn
            if cfg.record_history:
                report.residual_history.append(res)
            if res <= cfg.tol:
                report.converged = True
                break
            if beta <= eps * beta1:
                # Lanczos breakdown: the Krylov space is invariant, the iterate is final
                report.breakdown = True
                report.converged = True
                break

    report.wall_time = time.perf_counter() - t0
    r_final = b - matvec(x)
    report.final_true_residual = float(np.linalg.norm(r_final) / b_norm) if b_norm > 0 else float(np.linalg.norm(r_final))
    report.final_preconditioned_residual = float(np.linalg.norm(prec_res) / pb_norm) if pb_norm > 0 else 0.0
    return x, report
