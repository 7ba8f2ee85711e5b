"""Thomas algorithm for tridiagonal systems with several right-hand sides."""

import numpy as np
from numba import njit


@njit(cache=True)
def _thomas(lower, diag, upper, rhs):
    n, m = rhs.shape
    c = np.empty(n)
    x = np.empty((n, m))
    beta = diag[0]
    if beta == 0.0:
        raise ZeroDivisionError("zero pivot in tridiagonal solve")
    c[0] = upper[0] / beta
    for k in range(m):
        x[0, k] = rhs[0, k] / beta
    for i in range(1, n):
        beta = diag[i] - lower[i] * c[i - 1]
        if beta == 0.0:
            raise ZeroDivisionError("zero pivot in tridiagonal solve")
        c[i] = upper[i] / beta
        for k in range(m):
            x[i, k] = (rhs[i, k] - lower[i] * x[i - 1, k]) / beta
    for i in range(n - 2, -1, -1):
        for k in range(m):
            x[i, k] -= c[i] * x[i + 1, k]
    return x


def solve_tridiagonal(lower, diag, upper, rhs):
    """Solve ``A x = rhs`` for tridiagonal ``A``.

    Parameters
    ----------
    lower : ndarray, shape (n,)
        Sub-diagonal; ``lower[0]`` is ignored.
    diag : ndarray, shape (n,)
        Main diagonal.
    upper : ndarray, shape (n,)
        Super-diagonal; ``upper[-1]`` is ignored.
    rhs : ndarray, shape (n,) or (n, m)
        One right-hand side per column; all columns share one elimination.

    Returns
    -------
    x : ndarray
        Same shape as ``rhs``.
    """
    rhs = np.asarray(rhs, dtype=float)
    vector = rhs.ndim == 1
    b = np.ascontiguousarray(rhs.reshape(rhs.shape[0], -1))
    x = _thomas(
        np.ascontiguousarray(lower, dtype=float),
        np.ascontiguousarray(diag, dtype=float),
        np.ascontiguousarray(upper, dtype=float),
        b,
    )
    return x[:, 0] if vector else x
