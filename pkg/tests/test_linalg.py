import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from herkfac import linalg
from herkfac.errors import CurvatureError, ShapeError

from conftest import random_spd


def naive_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            for k in range(a.shape[1]):
                out[i, j] += a[i, k] * b[k, j]
    return out


def test_matmul_identity_and_analytic():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(linalg.matmul(np.eye(2), m), m)
    assert np.array_equal(linalg.matmul(m, [[0.0], [1.0]]), [[2.0], [4.0]])


def test_matmul_matches_triple_loop(rng):
    a, b = rng.standard_normal((5, 4)), rng.standard_normal((4, 3))
    assert np.max(np.abs(linalg.matmul(a, b) - naive_matmul(a, b))) <= 1e-12


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        linalg.matmul(np.ones((2, 3)), np.ones((2, 3)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.integers(1, 6), st.integers(1, 6), st.integers(1, 6))
def test_matmul_associative(seed, n, k, m, p):
    r = np.random.default_rng(seed)
    a, b, c = r.standard_normal((n, k)), r.standard_normal((k, m)), r.standard_normal((m, p))
    left = linalg.matmul(linalg.matmul(a, b), c)
    right = linalg.matmul(a, linalg.matmul(b, c))
    assert np.max(np.abs(left - right)) <= 1e-9 * max(1.0, np.max(np.abs(left)))


def test_sym_inverse_analytic():
    assert np.allclose(linalg.sym_inverse(np.eye(3), 0.0), np.eye(3), atol=0, rtol=0)
    assert np.allclose(linalg.sym_inverse(np.diag([2.0, 4.0]), 0.0), np.diag([0.5, 0.25]), atol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 6, 17, 32])
def test_sym_inverse_multiply_back(rng, n):
    m = random_spd(rng, n)
    jitter = 0.3
    inv = linalg.sym_inverse(m, jitter)
    assert np.max(np.abs(inv @ (m + jitter * np.eye(n)) - np.eye(n))) <= 1e-8
    assert linalg.is_symmetric(inv)


def test_sym_inverse_not_pd_raises():
    with pytest.raises(CurvatureError):
        linalg.sym_inverse(np.diag([1.0, -1.0]), 0.5)
    # enough jitter rescues it
    linalg.sym_inverse(np.diag([1.0, -1.0]), 2.0)


def test_sym_inverse_rejects_asymmetric():
    with pytest.raises(ShapeError):
        linalg.sym_inverse(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_kron_definitional():
    assert np.array_equal(linalg.kron(np.eye(2), np.eye(2)), np.eye(4))
    assert np.array_equal(linalg.kron([[1.0, 2.0]], [[3.0], [4.0]]), [[3.0, 6.0], [4.0, 8.0]])
    r = np.random.default_rng(0)
    a, b = r.standard_normal((3, 2)), r.standard_normal((2, 4))
    assert np.array_equal(linalg.kron(a, b), np.kron(a, b))


def test_kron_mixed_product(rng):
    A, B = rng.standard_normal((3, 2)), rng.standard_normal((4, 3))
    x, y = rng.standard_normal((2, 1)), rng.standard_normal((3, 1))
    lhs = linalg.kron(A, B) @ linalg.kron(x, y)
    rhs = linalg.kron(A @ x, B @ y)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10


def test_vec_column_stacking():
    assert np.array_equal(linalg.vec([[1.0, 2.0], [3.0, 4.0]]).ravel(), [1.0, 3.0, 2.0, 4.0])


def test_unvec_round_trip(rng):
    m = rng.standard_normal((3, 5))
    assert np.array_equal(linalg.unvec(linalg.vec(m), 3, 5), m)
    with pytest.raises(ShapeError):
        linalg.unvec(np.ones(7), 2, 3)


def test_kronecker_vec_identity(rng):
    for _ in range(10):
        A, B = rng.standard_normal((3, 3)), rng.standard_normal((2, 2))
        V = rng.standard_normal((2, 3))
        lhs = linalg.vec(B @ V @ A.T)
        rhs = linalg.kron(A, B) @ linalg.vec(V)
        assert np.max(np.abs(lhs - rhs)) <= 1e-10
