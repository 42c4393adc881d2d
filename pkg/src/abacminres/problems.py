"""All-at-once discretizations of the heat and fractional sub-diffusion test problems.

Space: central differences on the interior nodes of a uniform square grid,
``h = (c_hi - c_lo)/(m+1)``, lexicographic order (first coordinate slowest).
Time: backward Euler (``heat-bdf``), Crank-Nicolson (``heat-cn``,
``heat-var-cn``) or the L1 scheme for the Caputo derivative (``frac-l1``).

Variable coefficients enter the true operator through the conservative
stencil ``(a_{+1/2}(u_{+1} - u) - a_{-1/2}(u - u_{-1}))/h^2`` with ``a``
sampled at edge midpoints; the preconditioner only ever sees the surrogate
in which ``a`` is replaced by its mean over the interior nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .operator import SparseBlttOperator
from .spectral import SpectralBlttOperator
from .transforms import Dst1Plan

__all__ = [
    "FAMILIES",
    "ProblemSpec",
    "Problem",
    "L1Weights",
    "laplacian_eigenvalues",
    "laplacian_matrix",
    "variable_laplacian",
    "grid_points",
    "grid_mean",
    "l1_weights",
    "build_heat_bdf",
    "build_heat_cn",
    "build_heat_var_cn",
    "build_frac_l1",
    "build_problem",
]

FAMILIES = ("heat-bdf", "heat-cn", "heat-var-cn", "frac-l1")
COEFFICIENTS = ("constant", "example2", "example4")


@dataclass(frozen=True)
class ProblemSpec:
    """Discretization parameters.

    ``coefficient`` picks ``a(x)``: ``constant`` (a = 1), ``example2``
    (``(20 + x1^2)(20 + x2^2)``) or ``example4`` (``35 + x^3.5 + y^3.5``).
    ``domain=None`` selects the example's own domain ((0, pi) for the
    constant-coefficient fractional problem, (0, 1) otherwise).
    ``diffusion`` is the constant coefficient of the constant-coefficient
    heat problem.  Its default 1e-6 is the value under which the benchmark
    forcing ``exp(t)[phi - 2e-6 (x1(x1-1) + x2(x2-1))]`` is consistent with
    the exact solution ``exp(t) phi``; the forcing is always generated to
    match the exact solution for the chosen value.
    """

    family: str
    m: int
    N: int
    T: float = 1.0
    domain: tuple[float, float] | None = None
    gamma: float | None = None
    coefficient: str | None = None
    d: int = 2
    diffusion: float = 1e-6

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N!r}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d!r}")
        if self.family == "frac-l1":
            if self.gamma is None or not (0.0 < self.gamma < 1.0):
                raise ValueError(f"frac-l1 needs 0 < gamma < 1, got {self.gamma!r}")
        if not self.diffusion > 0:
            raise ValueError(f"diffusion must be positive, got {self.diffusion!r}")
        coeff = self.coefficient
        if coeff is None:
            coeff = "example2" if self.family == "heat-var-cn" else "constant"
            object.__setattr__(self, "coefficient", coeff)
        if coeff not in COEFFICIENTS:
            raise ValueError(f"unknown coefficient {coeff!r}; choose from {COEFFICIENTS}")
        if self.family in ("heat-bdf", "heat-cn") and coeff != "constant":
            raise ValueError(f"{self.family} is the constant-coefficient scheme; use heat-var-cn")
        if self.family == "heat-var-cn" and coeff == "constant":
            raise ValueError("heat-var-cn needs a variable coefficient (example2 or example4)")
        if coeff != "constant" and self.d != 2:
            raise ValueError("variable-coefficient examples are two-dimensional")
        if self.domain is None:
            lo_hi = (0.0, math.pi) if (self.family == "frac-l1" and coeff == "constant") else (0.0, 1.0)
            object.__setattr__(self, "domain", lo_hi)
        lo, hi = self.domain
        if not hi > lo:
            raise ValueError(f"empty domain {self.domain!r}")

    @property
    def h(self) -> float:
        lo, hi = self.domain
        return (hi - lo) / (self.m + 1)

    @property
    def tau(self) -> float:
        return self.T / self.N

    @property
    def M(self) -> int:
        return self.m**self.d


@dataclass
class Problem:
    """A generated all-at-once system ``A u = rhs``.

    ``operator`` is what the matvec uses (spectral for constant coefficients,
    sparse-block otherwise), ``surrogate`` is the spectral operator the
    preconditioner is built from, ``exact(x, t)`` evaluates the reference
    solution at grid coordinates ``x`` (tuple of arrays).
    """

    spec: ProblemSpec
    operator: object
    surrogate: SpectralBlttOperator
    sparse_operator: SparseBlttOperator
    rhs: np.ndarray
    exact: Callable | None
    coefficient_mean: float = 1.0
    notes: list[str] = field(default_factory=list)

    @property
    def M(self) -> int:
        return self.spec.M

    @property
    def N(self) -> int:
        return self.spec.N

    def exact_at_steps(self) -> np.ndarray:
        """Reference solution at ``t_1, ..., t_N`` on the grid, time-major."""
        if self.exact is None:
            raise ValueError("no exact solution available for this problem")
        x = grid_points(self.spec)
        tau = self.spec.tau
        return np.concatenate([self.exact(x, n * tau).reshape(-1) for n in range(1, self.N + 1)])


@dataclass(frozen=True)
class L1Weights:
    gamma: float
    l: np.ndarray
    l_init: np.ndarray


def grid_points(spec: ProblemSpec) -> tuple[np.ndarray, ...]:
    """Interior node coordinates as ``d`` arrays of shape ``(m,)*d`` (ij indexing)."""
    lo, _ = spec.domain
    x = lo + spec.h * np.arange(1, spec.m + 1)
    return tuple(np.meshgrid(*([x] * spec.d), indexing="ij"))


def laplacian_eigenvalues(m: int, d: int = 2, h: float | None = None, coeff_scale: float = 1.0) -> np.ndarray:
    """Eigenvalues of ``coeff_scale * Delta_h`` ordered like the DST-I modes.

    ``h`` defaults to ``1/(m+1)`` (unit interval).
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m!r}")
    if h is None:
        h = 1.0 / (m + 1)
    p = np.arange(1, m + 1)
    mu1 = -(4.0 / h**2) * np.sin(p * np.pi / (2 * (m + 1))) ** 2
    if d == 1:
        mu = mu1
    elif d == 2:
        mu = (mu1[:, None] + mu1[None, :]).reshape(-1)
    else:
        raise ValueError(f"d must be 1 or 2, got {d!r}")
    return coeff_scale * mu


def _second_difference(m: int, h: float) -> sp.csr_matrix:
    return sp.diags([np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)], [-1, 0, 1], format="csr") / h**2


def laplacian_matrix(m: int, d: int, h: float) -> sp.csr_matrix:
    """Sparse Dirichlet ``Delta_h`` (3-point in 1-D, 5-point in 2-D)."""
    L = _second_difference(m, h)
    if d == 1:
        return L
    eye = sp.identity(m, format="csr")
    return (sp.kron(L, eye) + sp.kron(eye, L)).tocsr()


def _edge_difference(m: int) -> sp.csr_matrix:
    # (m+1) x m forward differences over the edges, zero Dirichlet values outside
    return sp.diags([-np.ones(m), np.ones(m)], [0, -1], shape=(m + 1, m), format="csr")


def variable_laplacian(a: Callable, spec: ProblemSpec) -> sp.csr_matrix:
    """Conservative ``Delta_{a,h}`` with ``a`` sampled at edge midpoints (2-D)."""
    m, h = spec.m, spec.h
    lo, _ = spec.domain
    nodes = lo + h * np.arange(1, m + 1)
    edges = lo + h * (np.arange(m + 1) + 0.5)
    D = _edge_difference(m)
    eye = sp.identity(m, format="csr")
    Dx = sp.kron(D, eye)
    Dy = sp.kron(eye, D)
    ex, ny = np.meshgrid(edges, nodes, indexing="ij")
    nx, ey = np.meshgrid(nodes, edges, indexing="ij")
    ax = sp.diags(a(ex, ny).reshape(-1))
    ay = sp.diags(a(nx, ey).reshape(-1))
    return (-(Dx.T @ ax @ Dx + Dy.T @ ay @ Dy) / h**2).tocsr()


def grid_mean(a: Callable, spec: ProblemSpec) -> float:
    """Mean of ``a`` over the interior nodes."""
    return float(np.mean(a(*grid_points(spec))))


def l1_weights(gamma: float, N: int, tau: float) -> L1Weights:
    """L1-scheme Toeplitz weights ``l_k`` and initial-value weights ``l^(k)``."""
    if not (0.0 < gamma < 1.0):
        raise ValueError(f"gamma must lie in (0, 1), got {gamma!r}")
    g = math.gamma(2.0 - gamma)
    k = np.arange(N, dtype=float)
    p = 1.0 - gamma
    l = np.empty(N)
    l[0] = 1.0 / g
    kk = k[1:]
    l[1:] = ((kk + 1) ** p - 2 * kk**p + (kk - 1) ** p) / g
    kn = np.arange(1, N + 1, dtype=float)
    l_init = ((kn - 1) ** p - kn**p) / (tau**gamma * g)
    return L1Weights(gamma, l, l_init)


# ---------------------------------------------------------------- coefficients


def _coefficient(name: str) -> Callable:
    if name == "example2":
        return lambda x1, x2: (20.0 + x1**2) * (20.0 + x2**2)
    if name == "example4":
        return lambda x1, x2: 35.0 + x1**3.5 + x2**3.5
    return lambda *x: np.ones_like(x[0])


def _example1(spec: ProblemSpec):
    diff = 2.0 * spec.diffusion

    def phi(x):
        out = np.ones_like(x[0])
        for xi in x:
            out = out * xi * (xi - 1)
        return out

    def lap_factor(x):
        # sum over directions of prod_{j != i} x_j (x_j - 1)
        tot = np.zeros_like(x[0])
        for i in range(len(x)):
            term = np.ones_like(x[0])
            for j, xj in enumerate(x):
                if j != i:
                    term = term * xj * (xj - 1)
            tot = tot + term
        return tot

    f = lambda x, t: np.exp(t) * (phi(x) - diff * lap_factor(x))
    u = lambda x, t: np.exp(t) * phi(x)
    return f, u


def _example2(spec: ProblemSpec):
    a = _coefficient("example2")

    def f(x, t):
        x1, x2 = x
        p1, p2 = x1 * (1 - x1), x2 * (1 - x2)
        # the a_x2 term uses (20 + x1^2), consistent with the exact solution
        return np.exp(t) * (
            p1 * p2
            - 2 * x1 * (20 + x2**2) * (1 - 2 * x1) * p2
            - 2 * x2 * (20 + x1**2) * (1 - 2 * x2) * p1
            + 2 * a(x1, x2) * (p1 + p2)
        )

    u = lambda x, t: np.exp(t) * x[0] * (1 - x[0]) * x[1] * (1 - x[1])
    return f, u


def _example3(spec: ProblemSpec):
    g = spec.gamma
    c = 2.0 / math.gamma(3.0 - g)

    def shape(x):
        out = np.ones_like(x[0])
        for xi in x:
            out = out * np.sin(xi)
        return out

    f = lambda x, t: shape(x) * (c * t ** (2.0 - g) + spec.d * t**2)
    u = lambda x, t: shape(x) * t**2
    return f, u


def _example4(spec: ProblemSpec):
    g = spec.gamma
    c = 2.0 / math.gamma(3.0 - g)
    a = _coefficient("example4")
    pi = np.pi

    def f(x, t):
        x1, x2 = x
        s1, s2 = np.sin(pi * x1), np.sin(pi * x2)
        ax, ay = 3.5 * x1**2.5, 3.5 * x2**2.5
        return s1 * s2 * (c * t ** (2.0 - g) + 2 * pi**2 * a(x1, x2) * t**2) - pi * t**2 * (
            ax * np.cos(pi * x1) * s2 + ay * s1 * np.cos(pi * x2)
        )

    u = lambda x, t: np.sin(pi * x[0]) * np.sin(pi * x[1]) * t**2
    return f, u


def _u0(exact: Callable, spec: ProblemSpec) -> np.ndarray:
    return exact(grid_points(spec), 0.0).reshape(-1)


def _samples(f: Callable, spec: ProblemSpec, times) -> np.ndarray:
    x = grid_points(spec)
    return np.stack([f(x, t).reshape(-1) for t in times])


def _spectral(spec: ProblemSpec, table: np.ndarray, note: str) -> SpectralBlttOperator:
    return SpectralBlttOperator(table, Dst1Plan(spec.m, spec.d), scale_note=note)


def _two_step_table(mu: np.ndarray, first, second, N: int) -> np.ndarray:
    table = np.zeros((mu.size, N))
    table[:, 0] = first(mu)
    if N > 1:
        table[:, 1] = second(mu)
    return table


def _two_step_symbols(s: tuple[float, float], t: tuple[float, float], N: int):
    si, ti = np.zeros(N), np.zeros(N)
    si[0], ti[0] = s[0], t[0]
    if N > 1:
        si[1], ti[1] = s[1], t[1]
    return si, ti


# ---------------------------------------------------------------- generators


def build_heat_bdf(spec: ProblemSpec) -> Problem:
    """Backward Euler: ``A_(0) = (I - tau Delta_h)/tau``, ``A_(1) = -I/tau``."""
    if spec.family != "heat-bdf":
        raise ValueError(f"expected family heat-bdf, got {spec.family!r}")
    tau, N = spec.tau, spec.N
    mu = laplacian_eigenvalues(spec.m, spec.d, spec.h, coeff_scale=spec.diffusion)
    table = _two_step_table(mu, lambda mu: (1 - tau * mu) / tau, lambda mu: -np.ones_like(mu) / tau, N)
    op = _spectral(spec, table, f"heat-bdf m={spec.m} N={N}")
    s, t = _two_step_symbols((1 / tau, -1 / tau), (-1.0, 0.0), N)
    L = spec.diffusion * laplacian_matrix(spec.m, spec.d, spec.h)
    sparse = SparseBlttOperator(s, t, L, note="heat-bdf")

    f, u = _example1(spec)
    F = _samples(f, spec, tau * np.arange(1, N + 1))
    F[0] += _u0(u, spec) / tau
    return Problem(spec, op, op, sparse, F.reshape(-1), u)


def build_heat_cn(spec: ProblemSpec) -> Problem:
    """Crank-Nicolson: ``A_(0) = (I - tau/2 Delta_h)/tau``, ``A_(1) = (-I - tau/2 Delta_h)/tau``."""
    if spec.family != "heat-cn":
        raise ValueError(f"expected family heat-cn, got {spec.family!r}")
    tau, N = spec.tau, spec.N
    mu = laplacian_eigenvalues(spec.m, spec.d, spec.h, coeff_scale=spec.diffusion)
    table = _two_step_table(mu, lambda mu: (1 - 0.5 * tau * mu) / tau, lambda mu: (-1 - 0.5 * tau * mu) / tau, N)
    op = _spectral(spec, table, f"heat-cn m={spec.m} N={N}")
    L = spec.diffusion * laplacian_matrix(spec.m, spec.d, spec.h)
    s, t = _two_step_symbols((1 / tau, -1 / tau), (-0.5, -0.5), N)
    sparse = SparseBlttOperator(s, t, L, note="heat-cn")

    f, u = _example1(spec)
    F = _samples(f, spec, tau * (np.arange(1, N + 1) - 0.5))
    u0 = _u0(u, spec)
    F[0] += (u0 + 0.5 * tau * (L @ u0)) / tau
    return Problem(spec, op, op, sparse, F.reshape(-1), u)


def build_heat_var_cn(spec: ProblemSpec) -> Problem:
    """Variable-coefficient Crank-Nicolson with a mean-coefficient spectral surrogate."""
    if spec.family != "heat-var-cn":
        raise ValueError(f"expected family heat-var-cn, got {spec.family!r}")
    tau, N = spec.tau, spec.N
    a = _coefficient(spec.coefficient)
    La = variable_laplacian(a, spec)
    a_bar = grid_mean(a, spec)
    s, t = _two_step_symbols((1 / tau, -1 / tau), (-0.5, -0.5), N)
    sparse = SparseBlttOperator(s, t, La, note=f"heat-var-cn {spec.coefficient}")

    mu = laplacian_eigenvalues(spec.m, spec.d, spec.h, coeff_scale=a_bar)
    table = _two_step_table(mu, lambda mu: (1 - 0.5 * tau * mu) / tau, lambda mu: (-1 - 0.5 * tau * mu) / tau, N)
    surrogate = _spectral(spec, table, f"mean-coefficient surrogate, a_bar={a_bar:.6g}")

    if spec.coefficient == "example2":
        f, u = _example2(spec)
    else:
        f, u = _heat_example4(spec)
    F = _samples(f, spec, tau * (np.arange(1, N + 1) - 0.5))
    u0 = _u0(u, spec)
    F[0] += (u0 + 0.5 * tau * (La @ u0)) / tau
    return Problem(spec, sparse, surrogate, sparse, F.reshape(-1), u, coefficient_mean=a_bar)


def _heat_example4(spec: ProblemSpec):
    # heat equation with the fractional example's coefficient and u = sin sin t^2
    a = _coefficient("example4")
    pi = np.pi

    def f(x, t):
        x1, x2 = x
        s1, s2 = np.sin(pi * x1), np.sin(pi * x2)
        return s1 * s2 * (2 * t + 2 * pi**2 * a(x1, x2) * t**2) - pi * t**2 * (
            3.5 * x1**2.5 * np.cos(pi * x1) * s2 + 3.5 * x2**2.5 * s1 * np.cos(pi * x2)
        )

    u = lambda x, t: np.sin(pi * x[0]) * np.sin(pi * x[1]) * t**2
    return f, u


def build_frac_l1(spec: ProblemSpec) -> Problem:
    """L1 scheme: ``A_(0) = l_0/tau^g I - Delta_{a,h}``, ``A_(k) = l_k/tau^g I``."""
    if spec.family != "frac-l1":
        raise ValueError(f"expected family frac-l1, got {spec.family!r}")
    tau, N, g = spec.tau, spec.N, spec.gamma
    w = l1_weights(g, N, tau)
    scale = tau**-g
    variable = spec.coefficient != "constant"
    a = _coefficient(spec.coefficient)
    if variable:
        K = variable_laplacian(a, spec)
        a_bar = grid_mean(a, spec)
    else:
        K = laplacian_matrix(spec.m, spec.d, spec.h)
        a_bar = 1.0
    mu = laplacian_eigenvalues(spec.m, spec.d, spec.h, coeff_scale=a_bar)
    table = np.tile(w.l * scale, (mu.size, 1))
    table[:, 0] -= mu
    surrogate = _spectral(spec, table, f"frac-l1 gamma={g} a_bar={a_bar:.6g}")
    t_sym = np.zeros(N)
    t_sym[0] = -1.0
    sparse = SparseBlttOperator(w.l * scale, t_sym, K, note=f"frac-l1 {spec.coefficient}")

    f, u = _example4(spec) if variable else _example3(spec)
    F = _samples(f, spec, tau * np.arange(1, N + 1))
    F -= np.outer(w.l_init, _u0(u, spec))
    op = sparse if variable else surrogate
    return Problem(spec, op, surrogate, sparse, F.reshape(-1), u, coefficient_mean=a_bar)


_BUILDERS = {
    "heat-bdf": build_heat_bdf,
    "heat-cn": build_heat_cn,
    "heat-var-cn": build_heat_var_cn,
    "frac-l1": build_frac_l1,
}


def build_problem(spec: ProblemSpec) -> Problem:
    return _BUILDERS[spec.family](spec)
