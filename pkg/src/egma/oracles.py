"""Closed-form reference solutions.

The quadratic model ``V = |x|^2 / 2`` has explicit OM minimizers
``psi(t) = A e^t + B e^-t`` for every transition time ``T``; the Maier-Stein
path potential has an explicit critical point on the ``x`` axis.  These are
used as ground truth by the tests and by the ``oracle`` CLI command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .path import Path

__all__ = [
    "QuadSolution",
    "quad_solution",
    "quad_action",
    "quad_graph_limit",
    "quad_fw_times",
    "quad_case2_fw",
    "ms_critical_point",
]


def _vec(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def _norm(v):
    # scaled so that tiny coefficients at large T do not underflow when squared
    m = float(np.max(np.abs(v)))
    return 0.0 if m == 0.0 else m * float(np.linalg.norm(v / m))


def _coefficients(x_s, x_f, T):
    # A = (x_f - x_s e^-T) / (e^T - e^-T), B = (x_s e^T - x_f) / (e^T - e^-T),
    # rewritten with e^-T only so that large T does not overflow
    q = math.exp(-T)
    den = -math.expm1(-2.0 * T)  # 1 - e^{-2T}
    a = q * (x_f - x_s * q) / den
    b = (x_s - x_f * q) / den
    return a, b


@dataclass(frozen=True, eq=False)
class QuadSolution:
    """OM minimizer of the quadratic model for a fixed transition time.

    Attributes
    ----------
    A, B : ndarray
        Coefficients of ``psi(t) = A e^t + B e^-t``.
    T : float
    epsilon : float
    energy : float
        Conserved energy ``2 eps - 2 A.B``.
    om_action : float
        ``S_T`` at the minimizer.
    turning_time : float or None
        Time of closest approach to the origin, ``ln(|B|/|A|)/2``, when it lies in
        ``[0, T]``.
    min_distance_sq : float
        ``2|A||B| + 2 A.B``, the squared distance of closest approach when
        ``turning_time`` exists.
    """

    A: np.ndarray
    B: np.ndarray
    T: float
    epsilon: float
    x_s: np.ndarray
    x_f: np.ndarray

    @property
    def energy(self):
        return 2.0 * self.epsilon - 2.0 * float(self.A @ self.B)

    @property
    def om_action(self):
        return quad_action(self.epsilon, self.x_s, self.x_f, self.T)

    @property
    def turning_time(self):
        na, nb = _norm(self.A), _norm(self.B)
        if na == 0.0 or nb == 0.0:
            return None
        t = 0.5 * math.log(nb / na)
        return t if 0.0 <= t <= self.T else None

    @property
    def min_distance_sq(self):
        return 2.0 * (_norm(self.A) * _norm(self.B) + float(self.A @ self.B))

    def position(self, t):
        """``psi(t)``; evaluated as ``A e^t + B e^-t`` with ``A`` carrying ``e^-T``."""
        t = np.asarray(t, dtype=float)
        return np.multiply.outer(np.exp(t), self.A) + np.multiply.outer(np.exp(-t), self.B)

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        return np.multiply.outer(np.exp(t), self.A) - np.multiply.outer(np.exp(-t), self.B)

    def sample(self, n_points):
        """Times, positions and velocities on a uniform grid of ``[0, T]``."""
        t = np.linspace(0.0, self.T, int(n_points))
        return t, self.position(t), self.velocity(t)


def quad_solution(epsilon, x_s, x_f, T):
    """Minimizer of the quadratic-model OM functional with duration ``T``."""
    if not T > 0.0:
        raise ValueError("T must be positive")
    x_s, x_f = _vec(x_s), _vec(x_f)
    if x_s.shape != x_f.shape:
        raise ValueError("x_s and x_f must have the same dimension")
    a, b = _coefficients(x_s, x_f, float(T))
    return QuadSolution(A=a, B=b, T=float(T), epsilon=float(epsilon), x_s=x_s, x_f=x_f)


def quad_action(epsilon, x_s, x_f, T):
    """``S_T`` of the minimizer in closed form.

    Uses ``|A|^2 (e^{2T} - 1) = |x_f - x_s e^-T|^2 / (1 - e^{-2T})`` so that
    nothing overflows.
    """
    x_s, x_f = _vec(x_s), _vec(x_f)
    q = math.exp(-T)
    den = -math.expm1(-2.0 * T)
    _, b = _coefficients(x_s, x_f, float(T))
    d = x_f - x_s * q
    return float(
        0.5 * (x_f @ x_f)
        - 0.5 * (x_s @ x_s)
        - 2.0 * epsilon * T
        + 0.5 * (d @ d) / den
        + 0.5 * (b @ b) * den
    )


def quad_graph_limit(x_s, x_f, n_segments):
    """Large-``T`` graph limit on the positive axis: ``x_s -> 0 -> x_f``.

    Nodes are equally spaced in arclength ``L = x_s + x_f``; the corner sits at
    ``alpha* = x_s / (x_s + x_f)``.  Returned as a path in the plane (``y = 0``).
    """
    x_s, x_f = float(x_s), float(x_f)
    if not 0.0 < x_s < x_f:
        raise ValueError("need 0 < x_s < x_f")
    n = int(n_segments)
    if n < 2:
        raise ValueError("n_segments must be >= 2")
    length = x_s + x_f
    alpha = np.arange(n + 1) / n
    x = np.abs(x_s - length * alpha)
    x[-1] = x_f
    return Path(np.column_stack([x, np.zeros_like(x)]))


def _ratio(x_s, x_f, T):
    # f(T) = B / A = (x_s e^T - x_f) / (x_f - x_s e^-T)
    return (x_s * math.exp(T) - x_f) / (x_f - x_s * math.exp(-T))


def quad_fw_times(x_s, x_f, tol=1e-12):
    """``(T_a, T_b)`` with ``f(T_a) = 0`` and ``f(T_b) = 1`` for ``f = B/A``.

    ``T_a = ln(x_f/x_s)`` exactly; ``T_b`` by bisection on ``[T_a, T_a + 50]``,
    where ``f`` is increasing.
    """
    x_s, x_f = float(x_s), float(x_f)
    if not 0.0 < x_s < x_f:
        raise ValueError("need 0 < x_s < x_f")
    t_a = math.log(x_f / x_s)
    lo, hi = t_a, t_a + 50.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if _ratio(x_s, x_f, mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return t_a, 0.5 * (lo + hi)


def quad_case2_fw(R, theta1, theta2):
    """FW optimum between two points on the circle of radius ``R``.

    Returns ``(T_c, action, min_distance_sq)`` with
    ``T_c = acosh(1/cos d)``, ``action = R^2 sin d`` and
    ``min_distance_sq = R^2 cos d`` for ``d = theta2 - theta1``.
    """
    if not R > 0.0:
        raise ValueError("R must be positive")
    d = float(theta2) - float(theta1)
    if not 0.0 < d < 0.5 * math.pi:
        raise ValueError("need 0 < theta2 - theta1 < pi/2")
    return math.acosh(1.0 / math.cos(d)), R * R * math.sin(d), R * R * math.cos(d)


def ms_critical_point(epsilon):
    """``(|x_c|, E_c)`` of the Maier-Stein path potential on the ``x`` axis.

    ``x_c^2 = (2 + sqrt(1 + 24 eps)) / 3`` and ``E_c = 4 eps x_c^2 -
    (x_c - x_c^3)^2 / 2``.  The two critical points are ``(+-|x_c|, 0)``; the
    transition from ``(-1, 0)`` passes the left one.
    """
    if not epsilon >= 0.0:
        raise ValueError("epsilon must be nonnegative")
    xc2 = (2.0 + math.sqrt(1.0 + 24.0 * epsilon)) / 3.0
    xc = math.sqrt(xc2)
    return xc, 4.0 * epsilon * xc2 - 0.5 * (xc - xc * xc2) ** 2
