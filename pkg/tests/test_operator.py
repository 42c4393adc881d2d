import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abacminres.operator import (
    SparseBlttOperator,
    TimeReversal,
    bltt_matvec,
    lower_toeplitz_matvec,
    operator_matvec,
    symmetrized_matvec,
    time_reverse,
)
from abacminres.oracle import assemble_dense, time_reversal_matrix
from abacminres.spectral import SpectralBlttOperator
from abacminres.transforms import Dst1Plan

from .conftest import rel


def test_identity_operator(rng):
    op = SpectralBlttOperator.identity(3, 4, 2)
    v = rng.standard_normal(op.M * op.N)
    assert rel(bltt_matvec(op, v), v) < 1e-14
    assert rel(symmetrized_matvec(op, v), time_reverse(v, op.M, op.N)) < 1e-14


def test_hand_toeplitz():
    op = SpectralBlttOperator(np.array([[2.0, -1.0, 0.0]]), Dst1Plan(1))
    assert np.allclose(bltt_matvec(op, np.ones(3)), [2.0, 1.0, 1.0], atol=1e-14)


def test_random_matches_dense(rng):
    plan = Dst1Plan(3, 2)
    op = SpectralBlttOperator(rng.standard_normal((9, 8)), plan)
    v = rng.standard_normal(72)
    assert rel(bltt_matvec(op, v), assemble_dense(op) @ v) < 1e-12


def test_time_reverse_examples(rng):
    v = rng.standard_normal(5)
    assert np.array_equal(time_reverse(v, 5, 1), v)
    assert list(time_reverse(np.array(["a1", "a2", "b1", "b2"]), 2, 2)) == ["b1", "b2", "a1", "a2"]
    w = rng.standard_normal(24)
    assert np.array_equal(time_reverse(time_reverse(w, 4, 6), 4, 6), w)
    assert np.array_equal(TimeReversal(4, 6)(w), time_reverse(w, 4, 6))


def test_length_mismatch(random_op):
    op = random_op()
    with pytest.raises(ValueError):
        bltt_matvec(op, np.ones(op.M * op.N + 1))
    with pytest.raises(ValueError):
        time_reverse(np.ones(5), 2, 2)


def test_symmetrized_dense_symmetry(rng):
    op = SpectralBlttOperator(rng.standard_normal((4, 4)), Dst1Plan(2, 2))
    S = np.column_stack([symmetrized_matvec(op, e) for e in np.eye(16)])
    assert np.linalg.norm(S - S.T) / np.linalg.norm(S) <= 1e-13


def test_single_step_is_symmetric_block(rng):
    op = SpectralBlttOperator(rng.standard_normal((9, 1)), Dst1Plan(3, 2))
    S = np.column_stack([symmetrized_matvec(op, e) for e in np.eye(9)])
    assert np.allclose(S, S.T, atol=1e-14)
    assert np.allclose(S, assemble_dense(op), atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.sampled_from([1, 2]), st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_structured_equals_dense_property(m, d, N, seed):
    r = np.random.default_rng(seed)
    plan = Dst1Plan(m, d)
    if plan.size * N > 4096:
        N = max(1, 4096 // plan.size)
    op = SpectralBlttOperator(r.standard_normal((plan.size, N)), plan)
    v = r.standard_normal(op.M * op.N)
    A = assemble_dense(op)
    assert rel(bltt_matvec(op, v), A @ v) <= 1e-12
    Y = time_reversal_matrix(op.M, op.N)
    assert rel(symmetrized_matvec(op, v), Y @ A @ v) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(-5, 5))
def test_linearity(seed, a, b):
    r = np.random.default_rng(seed)
    op = SpectralBlttOperator(r.standard_normal((9, 7)), Dst1Plan(3, 2))
    u, v = r.standard_normal(63), r.standard_normal(63)
    lhs = bltt_matvec(op, a * u + b * v)
    rhs = a * bltt_matvec(op, u) + b * bltt_matvec(op, v)
    scale = abs(a) * np.linalg.norm(bltt_matvec(op, u)) + abs(b) * np.linalg.norm(bltt_matvec(op, v))
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(scale, 1e-300) + 1e-300


def test_lower_toeplitz_against_scipy(rng):
    from scipy.linalg import toeplitz
    import scipy.fft as sfft

    t = rng.standard_normal(9)
    x = rng.standard_normal(9)
    T = toeplitz(t, np.zeros(9))
    assert rel(lower_toeplitz_matvec(sfft.rfft(t, 18), x), T @ x) < 1e-13


def test_sparse_operator_matches_spectral(rng):
    import scipy.sparse as sp

    plan = Dst1Plan(3, 2)
    U = plan.matrix()
    lam = -np.abs(rng.standard_normal(9)) - 1
    K = sp.csr_matrix((U * lam) @ U.T)
    s, t = rng.standard_normal(5), rng.standard_normal(5)
    sparse = SparseBlttOperator(s, t, K)
    table = s[None, :] + t[None, :] * lam[:, None]
    spec = SpectralBlttOperator(table, plan)
    v = rng.standard_normal(45)
    assert rel(operator_matvec(sparse, v), operator_matvec(spec, v)) < 1e-12
    assert rel(symmetrized_matvec(sparse, v), symmetrized_matvec(spec, v)) < 1e-12
    assert rel(sparse.block(2).toarray(), s[2] * np.eye(9) + t[2] * K.toarray()) < 1e-14


def test_sparse_operator_validation():
    import scipy.sparse as sp

    with pytest.raises(ValueError):
        SparseBlttOperator(np.ones(3), np.ones(2), sp.identity(2))
    with pytest.raises(ValueError):
        SparseBlttOperator(np.ones(2), np.ones(2), sp.csr_matrix(np.ones((2, 3))))
