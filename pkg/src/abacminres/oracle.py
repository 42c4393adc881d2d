"""Dense small-scale reference computations and spectral diagnostics.

Everything here materializes ``MN x MN`` matrices, so every entry point is
guarded by ``MN <= MAX_DENSE_ORDER``.  Matrix square roots are Schur based
(``scipy.linalg.sqrtm``), which stays accurate where an eigenvector basis is
badly conditioned (the alpha-circulant eigenvectors have condition number
about ``alpha^(-(N-1)/N)``).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl

from .spectral import SpectralBlttOperator, check_admissible

__all__ = [
    "MAX_DENSE_ORDER",
    "OracleSizeError",
    "DenseBundle",
    "TheoryBounds",
    "IterationBound",
    "assemble_dense",
    "time_reversal_matrix",
    "alpha_circulant_blocks",
    "dense_alpha_circulant",
    "dense_bundle",
    "preconditioned_spectrum",
    "q_alpha_spectrum",
    "e_alpha_norm",
    "wraparound_norms",
    "toeplitz_sqrt_symbol",
    "theory_bounds",
    "iteration_bound_check",
    "clustered_iteration_bound",
    "random_admissible_operator",
    "PropertyResult",
    "FAULTS",
    "run_property_suite",
]

log = logging.getLogger(__name__)

MAX_DENSE_ORDER = 4096


class OracleSizeError(ValueError):
    """The dense oracle was asked for a matrix above the size guard."""


def _guard(M: int, N: int) -> None:
    if M * N > MAX_DENSE_ORDER:
        raise OracleSizeError(
            f"dense oracle needs MN <= {MAX_DENSE_ORDER}, got M={M}, N={N} (MN={M * N}); use a smaller grid"
        )


def _real_or_raise(a: np.ndarray, what: str, tol: float = 1e-8) -> tuple[np.ndarray, float]:
    if not np.iscomplexobj(a):
        return a, 0.0
    scale = max(np.abs(a).max(), np.finfo(float).tiny)
    resid = float(np.abs(a.imag).max() / scale)
    if resid > tol:
        raise ArithmeticError(f"{what}: imaginary residue {resid:.2e} is not rounding noise")
    return a.real.copy(), resid


def _blocks(op) -> list[np.ndarray]:
    if isinstance(op, SpectralBlttOperator):
        U = op.spatial_transform.matrix()
        return [(U * op.block_eigs[:, k]) @ U.T for k in range(op.N)]
    return [op.block(k).toarray() for k in range(op.N)]


def assemble_dense(op) -> np.ndarray:
    """Explicit BLTT matrix (time-major) of a spectral or sparse-block operator."""
    M, N = op.M, op.N
    _guard(M, N)
    blocks = _blocks(op)
    A = np.zeros((N, M, N, M))
    for n in range(N):
        for j in range(n + 1):
            A[n, :, j, :] = blocks[n - j]
    return A.reshape(M * N, M * N)


def time_reversal_matrix(M: int, N: int) -> np.ndarray:
    _guard(M, N)
    return np.kron(np.eye(N)[::-1], np.eye(M))


def alpha_circulant_blocks(op: SpectralBlttOperator, alpha: float) -> np.ndarray:
    """Dense ``N x N`` alpha-circulant matrix of every mode, shape ``(M, N, N)``.

    Entry ``(n, j)`` is ``lam^(n-j)`` on and below the diagonal and
    ``alpha * lam^(n-j+N)`` above it.
    """
    N = op.N
    n, j = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    lag = (n - j) % N
    weight = np.where(n >= j, 1.0, alpha)
    return op.block_eigs[:, lag] * weight


def _modes_to_dense(op: SpectralBlttOperator, G: np.ndarray) -> np.ndarray:
    # (I_N kron U) Pi blockdiag(G_i) Pi^T (I_N kron U)^T in time-major order
    U = op.spatial_transform.matrix()
    M, N = op.M, op.N
    out = np.einsum("pi,inj,qi->npjq", U, G, U, optimize=True)
    return out.reshape(M * N, M * N)


@dataclass
class DenseBundle:
    alpha: float
    M: int
    N: int
    A_dense: np.ndarray
    YA_dense: np.ndarray
    C_alpha_dense: np.ndarray
    C_alpha_sqrt_dense: np.ndarray
    P_alpha_dense: np.ndarray
    preconditioned_spectrum: np.ndarray | None = None
    sqrt_imag_residue: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def Y(self) -> np.ndarray:
        return time_reversal_matrix(self.M, self.N)


def dense_alpha_circulant(op: SpectralBlttOperator, alpha: float):
    """``(C_alpha, C_alpha^{1/2}, |C_alpha|)`` as dense real matrices.

    ``C_alpha`` is assembled from the alpha-circulant block pattern; each
    mode's ``N x N`` alpha-circulant is square-rooted on the principal branch
    and ``|C_alpha| = (C_alpha^{1/2})^T C_alpha^{1/2}``.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if not isinstance(op, SpectralBlttOperator):
        raise TypeError("dense_alpha_circulant needs the spectral (surrogate) operator")
    _guard(op.M, op.N)
    Chat = alpha_circulant_blocks(op, alpha)
    roots = np.empty(Chat.shape, dtype=complex)
    for i, Ci in enumerate(Chat):
        w = np.linalg.eigvals(Ci)
        if np.any((np.abs(w.imag) <= 1e-14 * np.abs(w).max()) & (w.real <= 0)):
            raise ArithmeticError(f"mode {i}: alpha-circulant eigenvalue on the closed negative real axis")
        roots[i] = sl.sqrtm(Ci)
    roots_real, resid = _real_or_raise(roots, "alpha-circulant square root", tol=1e-6)

    # C_alpha from the block pattern I kron A_(0) + sum_k H^(k) kron A_(k), not from the mode form
    blocks = _blocks(op)
    M, N = op.M, op.N
    C = np.zeros((N, M, N, M))
    for n in range(N):
        for j in range(N):
            C[n, :, j, :] = blocks[n - j] if n >= j else alpha * blocks[n - j + N]
    C = C.reshape(M * N, M * N)
    S = _modes_to_dense(op, roots_real)
    P = S.T @ S
    return C, S, 0.5 * (P + P.T), resid


def dense_bundle(op: SpectralBlttOperator, alpha: float, true_operator=None, spectrum: bool = True) -> DenseBundle:
    """Dense matrices for ``op`` (or ``true_operator`` when the matvec uses another operator)."""
    target = op if true_operator is None else true_operator
    A = assemble_dense(target)
    Y = time_reversal_matrix(op.M, op.N)
    YA = Y @ A
    C, S, P, resid = dense_alpha_circulant(op, alpha)
    b = DenseBundle(alpha, op.M, op.N, A, YA, C, S, P, sqrt_imag_residue=resid)
    if spectrum:
        b.preconditioned_spectrum = preconditioned_spectrum(b)
    return b


def _inv_sqrt(P: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(P)
    if w.min() <= 0:
        raise ArithmeticError(f"|C_alpha| is not positive definite (min eigenvalue {w.min():.3e})")
    return (V / np.sqrt(w)) @ V.T


def _similarity(bundle: DenseBundle, X: np.ndarray) -> np.ndarray:
    R = _inv_sqrt(bundle.P_alpha_dense)
    Z = R @ X @ R
    return 0.5 * (Z + Z.T)


def preconditioned_spectrum(bundle: DenseBundle) -> np.ndarray:
    """Sorted eigenvalues of ``P^{-1/2} Y A P^{-1/2}`` (similar to ``P^{-1} Y A``)."""
    return np.linalg.eigvalsh(_similarity(bundle, bundle.YA_dense))


def q_alpha_spectrum(bundle: DenseBundle) -> np.ndarray:
    """Eigenvalues of ``Q_alpha = P^{-1/2} Y C_alpha P^{-1/2}``; all +-1 in exact arithmetic."""
    return np.linalg.eigvalsh(_similarity(bundle, bundle.Y @ bundle.C_alpha_dense))


def e_alpha_norm(bundle: DenseBundle) -> float:
    """``||E_alpha||_2`` with ``E_alpha = P^{-1/2} Y (C_alpha - A) P^{-1/2}``."""
    E = _similarity(bundle, bundle.Y @ (bundle.C_alpha_dense - bundle.A_dense))
    return float(np.abs(np.linalg.eigvalsh(E)).max())


def wraparound_norms(op: SpectralBlttOperator, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Per mode: ``||H_{alpha,i}||_2`` of the wrap-around part and its bound ``alpha (lam_i^(0) - c0)``."""
    _guard(op.M, op.N)
    N = op.N
    n, j = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    upper = n < j
    H = op.block_eigs[:, (n - j) % N] * np.where(upper, alpha, 0.0)
    norms = np.array([np.linalg.norm(h, 2) for h in H])
    c0 = check_admissible(op).c0
    return norms, alpha * (op.block_eigs[:, 0] - c0)


def toeplitz_sqrt_symbol(symbol) -> np.ndarray:
    """First column of the positive-branch root of a lower triangular Toeplitz matrix.

    Matching coefficients in ``s * s = t`` gives ``s_0 = sqrt(t_0)`` and
    ``s_k = (t_k - sum_{j=1}^{k-1} s_j s_{k-j}) / (2 s_0)``.
    """
    t = np.asarray(symbol, dtype=float)
    if t[0] <= 0:
        raise ValueError("the diagonal of the Toeplitz matrix must be positive")
    s = np.zeros_like(t)
    s[0] = math.sqrt(t[0])
    for k in range(1, t.size):
        s[k] = (t[k] - s[1:k] @ s[k - 1 : 0 : -1]) / (2 * s[0])
    return s


def _lower_toeplitz(col: np.ndarray) -> np.ndarray:
    return sl.toeplitz(col, np.zeros_like(col))


@dataclass(frozen=True)
class TheoryBounds:
    alpha: float
    delta: float
    c0: float
    a0_norm: float
    lam_min_sts: float
    s_norm: float
    mu: float
    mu_modewise: float
    nu: float
    zeta: float
    E_norm: float = float("nan")
    sqrt_crosscheck: float = 0.0  # Schur root vs. coefficient recurrence, relative

    @property
    def interval_halfwidth(self) -> float:
        return self.alpha * self.mu

    @property
    def spectrum_bound_applies(self) -> bool:
        return self.alpha <= self.nu

    @property
    def alpha_admissible(self) -> bool:
        return self.alpha <= self.zeta * (1 + 1e-12)


def theory_bounds(op: SpectralBlttOperator, alpha: float, delta: float = 0.5, bundle: DenseBundle | None = None,
                  with_e_norm: bool = True) -> TheoryBounds:
    """``c0, mu, nu, zeta`` and (optionally) ``||E_alpha||_2`` for a spectral operator."""
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    _guard(op.M, op.N)
    rep = check_admissible(op)
    if not rep.admissible:
        raise ValueError(f"operator is not admissible (c0 = {rep.c0:.3e})")
    c0 = rep.c0
    lam0 = op.block_eigs[:, 0]
    a0 = float(np.abs(lam0).max())
    smin, smax, cross = np.inf, 0.0, 0.0
    for i in range(op.M):
        T = _lower_toeplitz(op.block_eigs[i])
        S = sl.sqrtm(T)
        S, _ = _real_or_raise(np.asarray(S), f"S(T_{i})", tol=1e-8)
        ref = _lower_toeplitz(toeplitz_sqrt_symbol(op.block_eigs[i]))
        cross = max(cross, float(np.linalg.norm(S - ref) / np.linalg.norm(ref)))
        sv = np.linalg.svd(S, compute_uv=False)
        smin, smax = min(smin, sv[-1]), max(smax, sv[0])
    lam_min = float(smin**2)
    mu = 2 * (a0 - c0) / lam_min
    mu_i = float(np.max(2 * (lam0 - c0) / lam_min))
    gap = a0 - c0
    denom = 4 * math.sqrt(c0) * gap * smax + gap**2
    nu = 1.0 if denom == 0 else min(1.0, 2 * c0 * lam_min / denom)
    zeta = min(delta**2 / mu, nu) if mu > 0 else nu
    e_norm = float("nan")
    if with_e_norm:
        if bundle is None:
            bundle = dense_bundle(op, alpha, spectrum=False)
        e_norm = e_alpha_norm(bundle)
    return TheoryBounds(alpha, delta, c0, a0, lam_min, float(smax), mu, mu_i, nu, zeta, e_norm, cross)


@dataclass(frozen=True)
class IterationBound:
    applicable: bool
    predicted: int | None
    delta_eff: float
    reason: str = ""


def iteration_bound_check(bounds: TheoryBounds, tol: float) -> IterationBound:
    """Smallest ``k`` with ``2 delta^(k-1) <= tol``, ``delta = sqrt(alpha mu)``; needs ``alpha <= zeta``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    d = math.sqrt(bounds.alpha * bounds.mu)
    if not bounds.alpha_admissible:
        return IterationBound(False, None, d, f"alpha = {bounds.alpha:.3e} exceeds zeta = {bounds.zeta:.3e}")
    if d >= 1:
        return IterationBound(False, None, d, "contraction factor is not below one")
    if 2.0 <= tol or d == 0:
        return IterationBound(True, 1, d)
    k = 1 + math.ceil(math.log(2.0 / tol) / math.log(1.0 / d) - 1e-12)
    return IterationBound(True, int(k), d)


def clustered_iteration_bound(eps: float, tol: float) -> int:
    """MINRES bound for a spectrum in ``[-1-eps, -1+eps] u [1-eps, 1+eps]``, ``0 <= eps < 1``."""
    if not (0.0 <= eps < 1.0):
        raise ValueError("eps must lie in [0, 1)")
    if eps == 0:
        return 2
    d = math.sqrt(eps * (2 + eps) / ((1 - eps) * (2 - eps)))
    if d >= 1:
        raise ValueError("clusters too wide for the bound")
    return 2 * math.ceil(math.log(2.0 / tol) / math.log(1.0 / d))


def random_admissible_operator(rng: np.random.Generator, m: int, N: int, d: int = 1, margin: float = 0.5):
    """Random spectral operator with ``c0 >= margin``."""
    from .transforms import Dst1Plan

    plan = Dst1Plan(m, d)
    eigs = rng.standard_normal((plan.size, N))
    eigs[:, 0] = np.abs(eigs[:, 1:]).sum(axis=1) + margin * (1.0 + rng.random(plan.size))
    return SpectralBlttOperator(eigs, plan, scale_note="random admissible")


# ---------------------------------------------------------------- property suite


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


def _broken_dft_forward(plan, v, axis=-1):
    import scipy.fft as sfft

    return sfft.fft(np.asarray(v, dtype=complex), axis=axis)  # unnormalized on purpose


def _broken_dst1_apply(plan, v):
    from .transforms import dst1_apply

    return 2.0 * dst1_apply(plan, v)


# fault name -> (kernel slot, replacement); used to prove the suite can fail
FAULTS = {
    "dft-normalization": ("dft_forward", _broken_dft_forward),
    "dst-normalization": ("dst1_apply", _broken_dst1_apply),
}

DEFAULT_SIZES = ((3, 1, 8), (3, 2, 8), (2, 2, 4), (4, 2, 32))


def run_property_suite(seed: int = 0, sizes=DEFAULT_SIZES, faults=()) -> list[PropertyResult]:
    """Randomized invariant checks over small operators; deterministic for a given seed."""
    from . import transforms as tr
    from .abac import build_alpha_spectrum, build_preconditioner
    from .minres import MinresConfig, solve
    from .operator import bltt_matvec, symmetrized_matvec, time_reverse
    from .spectral import dense_blocks, from_block_sequence

    kernels = {"dft_forward": tr.dft_forward, "dft_inverse": tr.dft_inverse, "dst1_apply": tr.dst1_apply}
    for f in faults:
        if f not in FAULTS:
            raise ValueError(f"unknown fault {f!r}; choose from {sorted(FAULTS)}")
        slot, repl = FAULTS[f]
        kernels[slot] = repl

    rng = np.random.default_rng(seed)
    worst: dict[str, tuple[float, float, str]] = {}

    def record(name, value, threshold, detail=""):
        value = float(value)
        old = worst.get(name)
        if old is None or value > old[0] or not np.isfinite(value):
            worst[name] = (value, threshold, detail)

    for m, d, N in sizes:
        plan = tr.Dst1Plan(m, d)
        M = plan.size
        tag = f"m={m} d={d} N={N}"

        # transforms
        dp = tr.DftPlan(N)
        v = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        fv = kernels["dft_forward"](dp, v)
        record("dft-unitarity", abs(np.linalg.norm(fv) - np.linalg.norm(v)) / np.linalg.norm(v), 1e-13, tag)
        record("dft-roundtrip", np.linalg.norm(kernels["dft_inverse"](dp, fv) - v) / np.linalg.norm(v), 1e-13, tag)
        x = rng.standard_normal(M)
        ux = kernels["dst1_apply"](plan, x)
        record("dst-orthogonality", abs(np.linalg.norm(ux) - np.linalg.norm(x)) / np.linalg.norm(x), 1e-13, tag)
        record("dst-involution", np.linalg.norm(kernels["dst1_apply"](plan, ux) - x) / np.linalg.norm(x), 1e-13, tag)
        if d == 1:
            record("dst-fft-agreement", np.linalg.norm(tr.dst1_apply_via_fft(plan, x) - ux) / np.linalg.norm(x), 1e-12, tag)
        w = rng.standard_normal(M * N)
        perm = tr.kron_reorder(w, M, N, "to_mode_major")
        ok = np.array_equal(np.sort(perm), np.sort(w)) and np.array_equal(tr.kron_reorder(perm, M, N, "to_time_major"), w)
        record("kron-permutation", 0.0 if ok else 1.0, 0.5, tag)

        # spectral and operator
        op = random_admissible_operator(rng, m, N, d)
        back = from_block_sequence(dense_blocks(op), plan)
        record("spectral-roundtrip", np.abs(back.block_eigs - op.block_eigs).max() / np.abs(op.block_eigs).max(), 1e-12, tag)
        A = assemble_dense(op)
        record("matvec-dense", np.linalg.norm(bltt_matvec(op, w) - A @ w) / np.linalg.norm(A @ w), 1e-9, tag)
        YA = np.column_stack([symmetrized_matvec(op, e) for e in np.eye(M * N)])
        record("symmetrized-symmetry", np.linalg.norm(YA - YA.T) / np.linalg.norm(YA), 1e-13, tag)

        for alpha in (1e-1, 1e-2, 1e-4):
            atag = f"{tag} alpha={alpha:g}"
            spec = build_alpha_spectrum(op, alpha)
            record("alpha-conjugate-symmetry", spec.conjugate_symmetry_residue(), 1e-12, atag)
            prec = build_preconditioner(op, alpha)
            bad = 0.0 if np.all(prec.sqrt_eigs.real > 0) else 1.0
            record("sqrt-branch", bad, 0.5, atag)
            b = dense_bundle(op, alpha)
            Pinv = np.linalg.inv(b.P_alpha_dense)
            record("precond-dense", np.linalg.norm(prec(w) - Pinv @ w) / np.linalg.norm(Pinv @ w), 1e-9, atag)
            u = rng.standard_normal(M * N)
            record("precond-symmetry", abs(prec(u) @ w - u @ prec(w)) / (np.linalg.norm(prec(u)) * np.linalg.norm(w)), 1e-11, atag)
            record("precond-positivity", 0.0 if prec(u) @ u > 0 else 1.0, 0.5, atag)
            record("q-alpha-orthogonal", np.abs(np.abs(q_alpha_spectrum(b)) - 1).max(), 1e-10, atag)
            record("sqrt-real", b.sqrt_imag_residue, 1e-11, atag)
            YS = b.Y @ b.C_alpha_sqrt_dense
            record("y-sqrt-symmetric", np.abs(YS - YS.T).max() / np.abs(YS).max(), 1e-11, atag)
            tb = theory_bounds(op, alpha, 0.5, bundle=b)
            spec_dist = np.abs(np.abs(b.preconditioned_spectrum) - 1).max()
            if tb.spectrum_bound_applies:
                record("spectrum-inclusion", spec_dist - alpha * tb.mu, 1e-12, atag)
            record("e-alpha-bound", tb.E_norm - alpha * tb.mu, 1e-8, atag)
            hn, hb = wraparound_norms(op, alpha)
            record("wraparound-bound", np.max(hn - hb), 1e-12, atag)

        # MINRES against a dense solve
        alpha = 1e-2
        prec = build_preconditioner(op, alpha)
        rhs = time_reverse(rng.standard_normal(M * N), M, N)
        xs, rep = solve(lambda z: symmetrized_matvec(op, z), prec, rhs, MinresConfig(tol=1e-12, max_iter=10 * M * N))
        xd = np.linalg.solve(YA, rhs)
        record("minres-dense", np.linalg.norm(xs - xd) / np.linalg.norm(xd), 1e-9, tag)

    # clustering shrinks in proportion to alpha
    op = random_admissible_operator(rng, 3, 8, 2)
    dists = []
    for alpha in (1e-1, 1e-2, 1e-3):
        sp_ = dense_bundle(op, alpha).preconditioned_spectrum
        dists.append(np.abs(np.abs(sp_) - 1).max())
    ratios = [dists[i] / dists[i + 1] for i in range(2)]
    # each tenfold drop in alpha should shrink the spread tenfold, within a factor 3
    record("clustering-slope", max(abs(math.log10(r / 10.0)) for r in ratios), math.log10(3.0), f"ratios={ratios}")

    return [PropertyResult(k, bool(v <= t), v, t, det) for k, (v, t, det) in worst.items()]
