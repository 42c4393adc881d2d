import numpy as np
import pytest

from abacminres.abac import build_preconditioner
from abacminres.minres import MinresConfig, solve
from abacminres.operator import operator_matvec, symmetrized_matvec, time_reverse
from abacminres.oracle import assemble_dense
from abacminres.problems import (
    ProblemSpec,
    build_problem,
    grid_mean,
    grid_points,
    l1_weights,
    laplacian_eigenvalues,
    laplacian_matrix,
    variable_laplacian,
)
from abacminres.spectral import check_admissible

from .conftest import rel

ALL_SPECS = [
    ProblemSpec("heat-bdf", 3, 4),
    ProblemSpec("heat-cn", 3, 4),
    ProblemSpec("heat-var-cn", 3, 4),
    ProblemSpec("heat-var-cn", 3, 4, coefficient="example4"),
    ProblemSpec("frac-l1", 3, 4, gamma=0.5),
    ProblemSpec("frac-l1", 3, 4, gamma=0.3, coefficient="example4"),
]


def _abac_solve(pb, alpha=1e-8, tol=1e-10):
    prec = build_preconditioner(pb.surrogate, alpha)
    b = time_reverse(pb.rhs, pb.M, pb.N)
    return solve(lambda v: symmetrized_matvec(pb.operator, v), prec, b, MinresConfig(tol=tol, max_iter=500))


# ---- Laplacian


def test_laplacian_single_node():
    assert laplacian_eigenvalues(1, 1).tolist() == pytest.approx([-8.0])


@pytest.mark.parametrize("d", [1, 2])
def test_laplacian_eigenvalues_match_dense(d):
    m, h = 3, 0.25
    dense = np.sort(np.linalg.eigvalsh(laplacian_matrix(m, d, h).toarray()))
    fast = np.sort(laplacian_eigenvalues(m, d, h))
    assert np.abs(dense - fast).max() <= 1e-11 * np.abs(dense).max()
    assert fast.max() < 0


def test_laplacian_modes_follow_dst_order():
    # the DST-I basis diagonalizes Delta_h with eigenvalues in the returned order
    from abacminres.transforms import Dst1Plan, dst1_apply

    m, d, h = 4, 2, 0.2
    L = laplacian_matrix(m, d, h).toarray()
    plan = Dst1Plan(m, d)
    S = dst1_apply(plan, np.eye(m**d))
    assert np.allclose(S @ L @ S, np.diag(laplacian_eigenvalues(m, d, h)), atol=1e-9)


def test_variable_laplacian_constant_coefficient_reduces():
    spec = ProblemSpec("heat-var-cn", 5, 2)
    La = variable_laplacian(lambda x, y: 3.0 * np.ones_like(x), spec)
    assert abs(La - 3.0 * laplacian_matrix(5, 2, spec.h)).max() < 1e-9


def test_variable_laplacian_symmetric_negative():
    spec = ProblemSpec("heat-var-cn", 6, 2)
    La = variable_laplacian(lambda x, y: (20 + x**2) * (20 + y**2), spec).toarray()
    assert np.allclose(La, La.T)
    assert np.linalg.eigvalsh(La).max() < 0


def test_grid_mean_two_ways():
    spec = ProblemSpec("heat-var-cn", 7, 2)
    a = lambda x, y: (20 + x**2) * (20 + y**2)
    x1, x2 = grid_points(spec)
    assert grid_mean(a, spec) == pytest.approx(np.sum(a(x1, x2)) / x1.size, rel=1e-14)
    # separable coefficient: the mean factorizes
    pts = x1[:, 0]
    assert grid_mean(a, spec) == pytest.approx(np.mean(20 + pts**2) ** 2, rel=1e-13)


# ---- L1 weights


def test_l1_frozen_values():
    w = l1_weights(0.1, 3, 1.0)
    assert w.l == pytest.approx([1.03975413434763641, -0.139258447828995294, -0.0460159689153988764], rel=1e-13)
    w = l1_weights(0.9, 3, 1.0)
    assert w.l == pytest.approx([1.05113700611177781, -0.975693263583102764, -0.0288261195631548430], rel=1e-13)
    w = l1_weights(0.5, 3, 0.25)
    assert w.l[0] == pytest.approx(1.12837916709551257, rel=1e-14)
    assert w.l[1] == pytest.approx(-0.660989212585294436, rel=1e-13)
    assert w.l_init == pytest.approx([-2.25675833419102515, -0.934779909020436276, -0.717281852011897731], rel=1e-13)


@pytest.mark.parametrize("gamma", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_l1_monotone(gamma):
    l = l1_weights(gamma, 64, 1 / 64).l
    assert l[0] > 0 and np.all(l[1:] < 0)
    assert np.all(np.diff(l[1:]) > 0)  # |l_k| decreases
    assert l[0] + l[1:].sum() > 0


@pytest.mark.parametrize("gamma", [0.0, 1.0, -0.2])
def test_l1_gamma_range(gamma):
    with pytest.raises(ValueError):
        l1_weights(gamma, 4, 0.25)


# ---- generated systems


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: f"{s.family}-{s.coefficient}")
def test_spectral_and_sparse_agree(spec, rng):
    pb = build_problem(spec)
    v = rng.standard_normal(pb.M * pb.N)
    A_sparse = assemble_dense(pb.sparse_operator)
    assert rel(pb.sparse_operator.matvec(v), A_sparse @ v) < 1e-13
    assert rel(operator_matvec(pb.operator, v), A_sparse @ v) < 1e-12
    if spec.coefficient == "constant":
        assert rel(assemble_dense(pb.surrogate), A_sparse) < 1e-12


@pytest.mark.parametrize("family", ["heat-bdf", "heat-cn"])
def test_dense_equivalence_moderate(family, rng):
    pb = build_problem(ProblemSpec(family, 7, 8))
    v = rng.standard_normal(pb.M * pb.N)
    assert rel(operator_matvec(pb.operator, v), pb.sparse_operator.matvec(v)) < 1e-12


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: f"{s.family}-{s.coefficient}")
def test_surrogates_admissible(spec):
    assert check_admissible(build_problem(spec).surrogate).c0 > 0


def test_constant_coefficient_surrogate_exact(rng):
    pb = build_problem(ProblemSpec("heat-cn", 5, 6))
    assert pb.surrogate is pb.operator
    pb = build_problem(ProblemSpec("heat-var-cn", 5, 6))
    assert pb.coefficient_mean == pytest.approx(grid_mean(lambda x, y: (20 + x**2) * (20 + y**2), pb.spec))


def test_rhs_shape_and_finite():
    for spec in ALL_SPECS:
        pb = build_problem(spec)
        assert pb.rhs.shape == (pb.M * pb.N,) and np.all(np.isfinite(pb.rhs))


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: f"{s.family}-{s.coefficient}")
def test_exact_solution_nearly_solves_system(spec):
    # the truncation residual of the exact grid solution shrinks with refinement
    res = []
    for k in (1, 2):
        s = ProblemSpec(spec.family, 4 * k - 1 if k == 1 else 7, 4 * k, gamma=spec.gamma, coefficient=spec.coefficient)
        pb = build_problem(s)
        u = pb.exact_at_steps()
        res.append(np.abs(operator_matvec(pb.operator, u) - pb.rhs).max())
    assert res[1] < res[0]


@pytest.mark.parametrize(
    "family,extra",
    [("heat-bdf", {}), ("heat-cn", {}), ("heat-var-cn", {}), ("frac-l1", {"gamma": 0.5})],
)
def test_discrete_error_decreases(family, extra):
    errs = []
    for m1 in (8, 16):
        pb = build_problem(ProblemSpec(family, m1 - 1, m1, **extra))
        x, rep = _abac_solve(pb, alpha=1e-8, tol=1e-12)
        assert rep.converged
        u = pb.exact_at_steps()
        errs.append(np.abs(x - u).max() / np.abs(u).max())
    assert errs[1] < errs[0]


def test_direct_solve_agrees_with_minres():
    pb = build_problem(ProblemSpec("heat-var-cn", 7, 8))
    A = assemble_dense(pb.sparse_operator)
    x_direct = np.linalg.solve(A, pb.rhs)
    x, rep = _abac_solve(pb, alpha=1e-8, tol=1e-12)
    assert rel(x, x_direct) < 1e-9


def test_single_step_cn():
    pb = build_problem(ProblemSpec("heat-cn", 7, 1))
    _, rep = _abac_solve(pb, tol=1e-10)
    assert rep.converged and rep.iterations <= 2


def test_example2_p_alpha_iterations():
    pb = build_problem(ProblemSpec("heat-var-cn", 31, 32))
    _, rep = _abac_solve(pb, alpha=1e-8, tol=1e-6)
    assert rep.converged and abs(rep.iterations - 10) <= 3


def test_example3_p_alpha_iterations():
    pb = build_problem(ProblemSpec("frac-l1", 31, 32, gamma=0.5))
    _, rep = _abac_solve(pb, alpha=1e-8, tol=1e-6)
    assert rep.converged and rep.iterations == 2


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(family="bogus", m=3, N=4),
        dict(family="heat-bdf", m=0, N=4),
        dict(family="heat-bdf", m=3, N=0),
        dict(family="frac-l1", m=3, N=4),
        dict(family="frac-l1", m=3, N=4, gamma=1.2),
        dict(family="heat-bdf", m=3, N=4, coefficient="example2"),
        dict(family="heat-var-cn", m=3, N=4, coefficient="constant"),
        dict(family="heat-var-cn", m=3, N=4, d=1),
        dict(family="heat-bdf", m=3, N=4, T=0.0),
        dict(family="heat-bdf", m=3, N=4, domain=(1.0, 0.0)),
    ],
)
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        ProblemSpec(**kwargs)
