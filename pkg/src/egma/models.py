"""Dynamical systems dX = b(X) dt + sqrt(2 eps) dW and their path potentials.

Every evaluator accepts a single point of shape ``(d,)`` or a batch of shape
``(..., d)`` and is vectorized over the leading axes.  Models are immutable;
all state lives in the constructor arguments.

The path potential is

    U(x) = -eps * div b(x) - |b(x)|^2 / 2,

which for gradient systems (b = -grad V) reads ``eps * lap V - |grad V|^2 / 2``.

New models subclass :class:`GradientModel` (implement ``potential``,
``grad_potential`` and ``laplacian_potential``) or :class:`NonGradientModel`
(implement ``drift``, ``drift_jacobian`` and ``grad_divergence``).  Setting
``analytic_grad_u = False`` makes ``grad_path_potential`` fall back to
central differences of ``path_potential``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ModelError",
    "DomainError",
    "UnsupportedCapability",
    "Model",
    "GradientModel",
    "NonGradientModel",
    "QuadraticModel",
    "TwoChannelModel",
    "LJClusterModel",
    "MaierSteinModel",
    "fd_step",
    "fd_gradient",
    "make_model",
    "MODEL_NAMES",
]


class ModelError(Exception):
    """Base class for model evaluation failures."""


class DomainError(ModelError, ValueError):
    """Raised when a point lies outside the domain of a model.

    For the Lennard-Jones cluster ``pair`` holds the offending atom indices.
    """

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class UnsupportedCapability(ModelError, NotImplementedError):
    """The model does not provide the requested evaluator."""


def fd_step(x, rel=1e-5):
    """Finite difference step ``rel * (1 + |x|_inf)`` per point, shape ``(..., 1)``."""
    x = np.asarray(x, dtype=float)
    return rel * (1.0 + np.max(np.abs(x), axis=-1, keepdims=True))


def fd_gradient(f, x, rel=1e-5):
    """Central-difference gradient of a batched scalar function ``f``.

    All ``2 d`` shifted copies of the batch are evaluated in one call.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    h = fd_step(x, rel)
    eye = np.eye(d)
    # shape (2, d, ..., d): shifted[s, k] = x +/- h e_k
    shifts = np.stack([eye, -eye])
    shifts = shifts.reshape((2, d) + (1,) * (x.ndim - 1) + (d,))
    shifted = x[None, None] + shifts * h[None, None]
    vals = f(shifted)
    grad = (vals[0] - vals[1]) / (2.0 * h[None, ..., 0])
    return np.moveaxis(grad, 0, -1)


class Model:
    """Common interface of all models.

    Attributes
    ----------
    dim : int
        Dimension of configuration space.
    epsilon : float
        Noise intensity.
    kind : str
        ``"gradient"`` or ``"non-gradient"``.
    analytic_grad_u : bool
        Whether ``grad_path_potential`` is a hand-derived expression.
    fd_rel : float
        Relative step used when ``grad_path_potential`` is numeric.
    """

    name = "model"
    kind = "gradient"
    analytic_grad_u = True

    def __init__(self, dim, epsilon, fd_rel=1e-5):
        if int(dim) < 1:
            raise ValueError("dim must be a positive integer")
        if not epsilon >= 0.0:
            raise ValueError("epsilon must be nonnegative")
        self._dim = int(dim)
        self._epsilon = float(epsilon)
        self._fd_rel = float(fd_rel)

    @property
    def dim(self):
        return self._dim

    @property
    def epsilon(self):
        return self._epsilon

    @property
    def fd_rel(self):
        return self._fd_rel

    @property
    def grad_mode(self):
        return "analytic" if self.analytic_grad_u else "numeric"

    def params(self):
        """Constructor parameters as a plain dict (used for run records)."""
        return {"epsilon": self._epsilon}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self._dim:
            raise ValueError(
                f"{self.name}: expected points of dimension {self._dim}, got shape {x.shape}"
            )
        return x

    # -- drift ------------------------------------------------------------
    def drift(self, x):
        raise NotImplementedError

    def drift_jacobian(self, x):
        """Jacobian with ``J[..., i, j] = d b_i / d x_j``."""
        raise UnsupportedCapability(f"{self.name} does not provide drift_jacobian")

    # -- path potential ---------------------------------------------------
    def path_potential(self, x):
        raise NotImplementedError

    def grad_path_potential(self, x):
        if self.analytic_grad_u:
            return self._grad_path_potential_analytic(self._check(x))
        return self.grad_path_potential_fd(x)

    def grad_path_potential_fd(self, x, rel=None):
        """Central differences of ``path_potential`` with step ``rel*(1+|x|_inf)``."""
        x = self._check(x)
        return fd_gradient(self.path_potential, x, self._fd_rel if rel is None else rel)

    def _grad_path_potential_analytic(self, x):
        raise NotImplementedError


class GradientModel(Model):
    """Model with drift ``b = -grad V``."""

    kind = "gradient"

    def potential(self, x):
        raise NotImplementedError

    def grad_potential(self, x):
        raise NotImplementedError

    def laplacian_potential(self, x):
        raise NotImplementedError

    def drift(self, x):
        return -self.grad_potential(x)

    def path_potential(self, x):
        g = self.grad_potential(x)
        return self._epsilon * self.laplacian_potential(x) - 0.5 * np.sum(g * g, axis=-1)


class NonGradientModel(Model):
    """Model specified through its drift and drift Jacobian."""

    kind = "non-gradient"

    def grad_divergence(self, x):
        """Gradient of ``div b``."""
        raise NotImplementedError

    def divergence(self, x):
        return np.trace(self.drift_jacobian(x), axis1=-2, axis2=-1)

    def path_potential(self, x):
        b = self.drift(x)
        return -self._epsilon * self.divergence(x) - 0.5 * np.sum(b * b, axis=-1)

    def _grad_path_potential_analytic(self, x):
        # grad U = -eps grad(div b) - (grad b)^T b
        b = self.drift(x)
        jac = self.drift_jacobian(x)
        return -self._epsilon * self.grad_divergence(x) - np.einsum("...ij,...i->...j", jac, b)


class QuadraticModel(GradientModel):
    """``V = |x|^2 / 2`` in the plane; ``U = 2 eps - |x|^2 / 2``."""

    name = "quadratic"

    def __init__(self, epsilon=0.1, fd_rel=1e-5):
        super().__init__(2, epsilon, fd_rel)

    def potential(self, x):
        x = self._check(x)
        return 0.5 * np.sum(x * x, axis=-1)

    def grad_potential(self, x):
        return np.array(self._check(x), copy=True)

    def laplacian_potential(self, x):
        x = self._check(x)
        return np.full(x.shape[:-1], float(self._dim))

    def path_potential(self, x):
        x = self._check(x)
        return 2.0 * self._epsilon - 0.5 * np.sum(x * x, axis=-1)

    def _grad_path_potential_analytic(self, x):
        return -np.array(x, copy=True)


class TwoChannelModel(GradientModel):
    """Two-channel potential with a straight and a circular pathway.

    ``V(x, y) = 4 (x^2 + y^2 - 1)^2 y^2 - exp(-4((x-1)^2 + y^2))
    - exp(-4((x+1)^2 + y^2)) + exp(8(x - 1.5)) + exp(-8(x + 1.5))
    + exp(-gamma (y + 0.25)) + 0.2 exp(-8 x^2)``.

    Minima sit near (+-1, 0); the saddle of the straight channel is near the
    origin and the saddle of the circular channel near (0, 1).  With
    ``gamma = 12.16`` the two saddles have (nearly) the same energy.
    """

    name = "two-channel"
    analytic_grad_u = False

    def __init__(self, epsilon=0.05, gamma=12.16, fd_rel=1e-5):
        super().__init__(2, epsilon, fd_rel)
        self._gamma = float(gamma)

    @property
    def gamma(self):
        return self._gamma

    def params(self):
        return {"epsilon": self._epsilon, "gamma": self._gamma}

    def _terms(self, x):
        x = self._check(x)
        px, py = x[..., 0], x[..., 1]
        ga = np.exp(-4.0 * ((px - 1.0) ** 2 + py**2))
        gb = np.exp(-4.0 * ((px + 1.0) ** 2 + py**2))
        w1 = np.exp(8.0 * (px - 1.5))
        w2 = np.exp(-8.0 * (px + 1.5))
        wy = np.exp(-self._gamma * (py + 0.25))
        bump = 0.2 * np.exp(-8.0 * px**2)
        return px, py, ga, gb, w1, w2, wy, bump

    def potential(self, x):
        px, py, ga, gb, w1, w2, wy, bump = self._terms(x)
        q = px**2 + py**2 - 1.0
        return 4.0 * q**2 * py**2 - ga - gb + w1 + w2 + wy + bump

    def grad_potential(self, x):
        px, py, ga, gb, w1, w2, wy, bump = self._terms(x)
        q = px**2 + py**2 - 1.0
        gx = (
            16.0 * px * q * py**2
            + 8.0 * (px - 1.0) * ga
            + 8.0 * (px + 1.0) * gb
            + 8.0 * w1
            - 8.0 * w2
            - 16.0 * px * bump
        )
        gy = (
            16.0 * q * py**3
            + 8.0 * q**2 * py
            + 8.0 * py * ga
            + 8.0 * py * gb
            - self._gamma * wy
        )
        return np.stack([gx, gy], axis=-1)

    def laplacian_potential(self, x):
        px, py, ga, gb, w1, w2, wy, bump = self._terms(x)
        q = px**2 + py**2 - 1.0
        r2 = px**2 + py**2
        ra = (px - 1.0) ** 2 + py**2
        rb = (px + 1.0) ** 2 + py**2
        return (
            96.0 * q * py**2
            + 32.0 * py**2 * r2
            + 8.0 * q**2
            - ga * (64.0 * ra - 16.0)
            - gb * (64.0 * rb - 16.0)
            + 64.0 * (w1 + w2)
            + self._gamma**2 * wy
            + bump * (256.0 * px**2 - 16.0)
        )


class LJClusterModel(GradientModel):
    """Planar Lennard-Jones cluster, ``V = 2 delta sum_{i != j} (s/r)^12 - (s/r)^6``.

    The sum runs over ordered pairs, so each unordered pair contributes
    ``4 delta ((s/r)^12 - (s/r)^6)``.  Coordinates are flattened as
    ``(x_1, y_1, x_2, y_2, ...)``.
    """

    name = "lj-cluster"
    analytic_grad_u = False
    atom_dim = 2

    def __init__(
        self, epsilon=0.01, n_atoms=7, delta=1.0, sigma=1.0, grad_u="numeric", fd_rel=1e-5
    ):
        if grad_u not in ("numeric", "analytic"):
            raise ValueError("grad_u must be 'numeric' or 'analytic'")
        if int(n_atoms) < 2:
            raise ValueError("n_atoms must be at least 2")
        if delta <= 0 or sigma <= 0:
            raise ValueError("delta and sigma must be positive")
        super().__init__(self.atom_dim * int(n_atoms), epsilon, fd_rel)
        self._n_atoms = int(n_atoms)
        self._delta = float(delta)
        self._sigma = float(sigma)
        self.analytic_grad_u = grad_u == "analytic"
        self._iu = np.triu_indices(self._n_atoms, k=1)
        n_pairs = len(self._iu[0])
        # +1 for the first atom of a pair, -1 for the second
        self._incidence = np.zeros((self._n_atoms, n_pairs))
        self._incidence[self._iu[0], np.arange(n_pairs)] = 1.0
        self._incidence[self._iu[1], np.arange(n_pairs)] = -1.0

    @property
    def n_atoms(self):
        return self._n_atoms

    def params(self):
        return {
            "epsilon": self._epsilon,
            "n_atoms": self._n_atoms,
            "delta": self._delta,
            "sigma": self._sigma,
            "grad_u": self.grad_mode,
        }

    def positions(self, x):
        x = self._check(x)
        return x.reshape(x.shape[:-1] + (self._n_atoms, self.atom_dim))

    def _pairs(self, x):
        pos = self.positions(x)
        i, j = self._iu
        diff = pos[..., i, :] - pos[..., j, :]
        r = np.sqrt(np.sum(diff * diff, axis=-1))
        rmin = r.min(axis=None) if r.size else np.inf
        if rmin < 1e-8 * self._sigma:
            flat = np.argmin(r.reshape(-1, r.shape[-1]).min(axis=0))
            pair = (int(i[flat]), int(j[flat]))
            raise DomainError(f"atoms {pair[0]} and {pair[1]} coincide (r={rmin:.3e})", pair=pair)
        return pos, diff, r

    def _radial(self, r):
        # pair energy phi(r) = 4 d (s^12 r^-12 - s^6 r^-6) and its first two derivatives
        s6 = (self._sigma / r) ** 6
        s12 = s6 * s6
        c = 4.0 * self._delta
        phi = c * (s12 - s6)
        dphi = c * (-12.0 * s12 + 6.0 * s6) / r
        d2phi = c * (156.0 * s12 - 42.0 * s6) / (r * r)
        return phi, dphi, d2phi

    def _d3phi(self, r):
        s6 = (self._sigma / r) ** 6
        return 4.0 * self._delta * (-2184.0 * s6 * s6 + 336.0 * s6) / r**3

    def potential(self, x):
        _, _, r = self._pairs(x)
        phi, _, _ = self._radial(r)
        return phi.sum(axis=-1)

    def grad_potential(self, x):
        _, diff, r = self._pairs(x)
        _, dphi, _ = self._radial(r)
        f = (dphi / r)[..., None] * diff
        g = np.einsum("ap,...pk->...ak", self._incidence, f)
        return g.reshape(g.shape[:-2] + (self._dim,))

    def laplacian_potential(self, x):
        _, _, r = self._pairs(x)
        _, dphi, d2phi = self._radial(r)
        # each pair appears in the Laplacian w.r.t. both atoms
        return 2.0 * np.sum(d2phi + (self.atom_dim - 1) * dphi / r, axis=-1)

    def _scatter(self, f):
        g = np.einsum("ap,...pk->...ak", self._incidence, f)
        return g.reshape(g.shape[:-2] + (self._dim,))

    def _grad_path_potential_analytic(self, x):
        # grad U = eps grad(lap V) - Hess(V) grad V, assembled pair by pair
        _, diff, r = self._pairs(x)
        _, dphi, d2phi = self._radial(r)
        e = diff / r[..., None]
        k = self.atom_dim - 1
        dg = self._d3phi(r) + k * (d2phi / r - dphi / (r * r))
        grad_lap = self._scatter((2.0 * dg)[..., None] * e)

        gv = self.positions(self.grad_potential(x))
        i, j = self._iu
        w = gv[..., i, :] - gv[..., j, :]
        ew = np.sum(e * w, axis=-1)[..., None]
        hw = d2phi[..., None] * ew * e + (dphi / r)[..., None] * (w - ew * e)
        return self._epsilon * grad_lap - self._scatter(hw)


class MaierSteinModel(NonGradientModel):
    """``b = (x - x^3 - beta x y^2, -(1 + x^2) y)``; gradient type iff ``beta == 1``."""

    name = "maier-stein"

    def __init__(self, epsilon=0.1, beta=10.0, fd_rel=1e-5):
        if beta <= 0:
            raise ValueError("beta must be positive")
        super().__init__(2, epsilon, fd_rel)
        self._beta = float(beta)

    @property
    def beta(self):
        return self._beta

    def params(self):
        return {"epsilon": self._epsilon, "beta": self._beta}

    def drift(self, x):
        x = self._check(x)
        px, py = x[..., 0], x[..., 1]
        return np.stack([px - px**3 - self._beta * px * py**2, -(1.0 + px**2) * py], axis=-1)

    def drift_jacobian(self, x):
        x = self._check(x)
        px, py = x[..., 0], x[..., 1]
        bt = self._beta
        row0 = np.stack([1.0 - 3.0 * px**2 - bt * py**2, -2.0 * bt * px * py], axis=-1)
        row1 = np.stack([-2.0 * px * py, -(1.0 + px**2)], axis=-1)
        return np.stack([row0, row1], axis=-2)

    def divergence(self, x):
        x = self._check(x)
        return -4.0 * x[..., 0] ** 2 - self._beta * x[..., 1] ** 2

    def grad_divergence(self, x):
        x = self._check(x)
        return np.stack([-8.0 * x[..., 0], -2.0 * self._beta * x[..., 1]], axis=-1)

    def path_potential(self, x):
        x = self._check(x)
        px, py = x[..., 0], x[..., 1]
        e, bt = self._epsilon, self._beta
        b1 = px - px**3 - bt * px * py**2
        b2 = (1.0 + px**2) * py
        return 4.0 * e * px**2 + e * bt * py**2 - 0.5 * (b1**2 + b2**2)


MODEL_NAMES = {
    "quadratic": QuadraticModel,
    "two-channel": TwoChannelModel,
    "lj-cluster": LJClusterModel,
    "maier-stein": MaierSteinModel,
}


def make_model(name, **params):
    """Build one of the built-in models from its name and parameter table."""
    try:
        cls = MODEL_NAMES[name]
    except KeyError:
        raise ValueError(
            f"unknown model {name!r}; expected one of {sorted(MODEL_NAMES)}"
        ) from None
    return cls(**params)
