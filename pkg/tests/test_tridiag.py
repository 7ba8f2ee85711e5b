import numpy as np
import pytest
from scipy.linalg import solve_banded

from egma.tridiag import solve_tridiagonal


def banded(lower, diag, upper):
    ab = np.zeros((3, len(diag)))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return ab


@pytest.mark.parametrize("n,m", [(1, 1), (2, 3), (17, 1), (400, 14)])
def test_matches_banded_solver(n, m):
    rng = np.random.default_rng(n * 31 + m)
    lower, upper = rng.uniform(-1, 0, n), rng.uniform(-1, 0, n)
    diag = 1.0 + np.abs(lower) + np.abs(upper) + rng.uniform(0, 1, n)
    rhs = rng.standard_normal((n, m))
    got = solve_tridiagonal(lower, diag, upper, rhs)
    ref = solve_banded((1, 1), banded(lower, diag, upper), rhs)
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-12)


def test_vector_rhs_keeps_shape():
    lower = np.array([0.0, -1.0, -1.0])
    diag = np.array([3.0, 3.0, 3.0])
    upper = np.array([-1.0, -1.0, 0.0])
    x = solve_tridiagonal(lower, diag, upper, np.array([1.0, 2.0, 3.0]))
    assert x.shape == (3,)
    a = np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)
    np.testing.assert_allclose(a @ x, [1.0, 2.0, 3.0], rtol=1e-14)


def test_columns_are_solved_independently():
    rng = np.random.default_rng(3)
    n = 50
    lower, upper = -rng.uniform(0, 1, n), -rng.uniform(0, 1, n)
    diag = 3.0 + rng.uniform(0, 1, n)
    rhs = rng.standard_normal((n, 4))
    joint = solve_tridiagonal(lower, diag, upper, rhs)
    for k in range(4):
        np.testing.assert_array_equal(joint[:, k], solve_tridiagonal(lower, diag, upper, rhs[:, k]))


def test_zero_pivot_raises():
    with pytest.raises(ZeroDivisionError):
        solve_tridiagonal(np.zeros(2), np.array([0.0, 1.0]), np.zeros(2), np.ones(2))
