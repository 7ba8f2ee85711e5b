"""Energy-climbing geometric minimization (EGMA).

Each iteration relaxes the interior nodes along

    2 K phi'' + |phi'|^2 (I - tau tau^T) grad U  [+ drift rotation term]

with ``K = E_n - U(phi)`` and ``E_n`` the node maximum of ``U``, then
redistributes the nodes to equal arclength.  At the maximizing node ``K = 0``
and the update is a steepest-ascent step on ``U``, which drives ``E_n`` up to
the critical energy.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .models import ModelError
from .path import Path, PathError, reparametrize_equal_arclength
from .tridiag import solve_tridiagonal

__all__ = [
    "SCHEMES",
    "SolverConfig",
    "IterationTrace",
    "Divergence",
    "egma_step_explicit",
    "egma_step_semi_implicit",
    "egma_run",
    "euler_lagrange_residual",
    "explicit_step_limit",
]

log = logging.getLogger(__name__)

SCHEMES = ("explicit", "semi-implicit")
NONGRADIENT_FORMS = ("consistent", "printed")


class Divergence(ArithmeticError):
    """A step produced non-finite coordinates."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


@dataclass(frozen=True)
class SolverConfig:
    """Numerical parameters of an EGMA run.

    Attributes
    ----------
    n_segments : int
        Number of path segments ``N`` (``N + 1`` nodes).
    ds : float or None
        Relaxation step.  ``None`` selects 0.01 for the semi-implicit scheme
        and ``min(0.01, h^2 / (4 max K))`` (re-evaluated every step) for the
        explicit one.
    tol : float
        Stop when ``max |phi^{n+1} - phi^n| / ds < tol``.
    max_iters : int
    scheme : {"semi-implicit", "explicit"}
    record_every : int or None
        Trace stride.  ``None`` records every step up to 1000, then every 10th.
    divergence_radius, divergence_energy : float
        A run is declared diverged once a node leaves the ball of this radius
        or the energy exceeds this cap.
    nongradient_form : {"consistent", "printed"}
        Weight of the drift rotation term for non-gradient models:
        ``sqrt(2K) |phi'| (grad b^T - grad b) phi'`` ("consistent", the
        Euler-Lagrange operator of the geometric action) or the same without
        the ``|phi'|`` factor ("printed").
    """

    n_segments: int = 100
    ds: float | None = None
    tol: float = 1e-6
    max_iters: int = 10000
    scheme: str = "semi-implicit"
    record_every: int | None = None
    divergence_radius: float = 1e3
    divergence_energy: float = 1e6
    nongradient_form: str = "consistent"

    def __post_init__(self):
        if int(self.n_segments) < 2:
            raise ValueError("n_segments must be >= 2")
        if self.ds is not None and not self.ds > 0:
            raise ValueError("ds must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iters) < 1:
            raise ValueError("max_iters must be a positive integer")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.record_every is not None and int(self.record_every) < 1:
            raise ValueError("record_every must be a positive integer")
        if self.nongradient_form not in NONGRADIENT_FORMS:
            raise ValueError(f"nongradient_form must be one of {NONGRADIENT_FORMS}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass(eq=False)
class IterationTrace:
    """History of an EGMA run.

    ``iterations[k]`` is the iteration index of the ``k``-th record;
    ``energies[k]`` is ``E_n`` of that path and ``residuals[k]`` the stopping
    residual of the step that produced it (``nan`` for the initial path).
    ``max_abs[k]`` holds ``max_j |phi_j|`` per coordinate.
    """

    iterations: np.ndarray
    energies: np.ndarray
    residuals: np.ndarray
    max_abs: np.ndarray
    status: str
    iterations_run: int
    final_path: Path
    final_energy: float
    final_residual: float
    scheme: str
    message: str = ""
    monotone_violations: list = field(default_factory=list)

    def summary(self):
        return {
            "status": self.status,
            "iterations": int(self.iterations_run),
            "final_energy": float(self.final_energy),
            "final_residual": None
            if not math.isfinite(self.final_residual)
            else float(self.final_residual),
            "scheme": self.scheme,
            "message": self.message,
        }

    def energy_at(self, n):
        """Energy ``E_n`` of the recorded iteration ``n``."""
        idx = np.flatnonzero(self.iterations == n)
        if idx.size == 0:
            raise KeyError(f"iteration {n} was not recorded")
        return float(self.energies[idx[0]])


def explicit_step_limit(n_segments, kinetic_max):
    """Diffusive stability bound ``h^2 / (4 max K)`` of the explicit scheme."""
    h = 1.0 / n_segments
    return h * h / (4.0 * kinetic_max + np.finfo(float).eps)


def _forcing(model, nodes, u, energy, nongradient_form):
    """Interior values of ``K``, ``D^2 phi`` and the explicit forcing term."""
    n = nodes.shape[0] - 1
    x = nodes[1:-1]
    d1 = (nodes[2:] - nodes[:-2]) * (0.5 * n)
    d2 = (nodes[2:] - 2.0 * x + nodes[:-2]) * float(n * n)
    kin = np.maximum(energy - u[1:-1], 0.0)
    gu = model.grad_path_potential(x)
    speed2 = np.sum(d1 * d1, axis=1)
    force = speed2[:, None] * gu - np.sum(gu * d1, axis=1)[:, None] * d1
    if model.kind != "gradient":
        jac = model.drift_jacobian(x)
        # (grad b^T - grad b) . D phi
        rot = np.einsum("nji,nj->ni", jac, d1) - np.einsum("nij,nj->ni", jac, d1)
        weight = np.sqrt(2.0 * kin)
        if nongradient_form == "consistent":
            weight = weight * np.sqrt(speed2)
        force = force + weight[:, None] * rot
    return kin, d2, force


def _check_finite(nodes):
    bad = ~np.all(np.isfinite(nodes), axis=1)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise Divergence(f"non-finite coordinates at node {j}", node=j)


def _advance(model, nodes, u, energy, ds, scheme, nongradient_form):
    kin, d2, force = _forcing(model, nodes, u, energy, nongradient_form)
    new = nodes.copy()
    if scheme == "explicit":
        new[1:-1] = nodes[1:-1] + ds * (2.0 * kin[:, None] * d2 + force)
    else:
        n = nodes.shape[0] - 1
        a = 2.0 * ds * kin * float(n * n)
        rhs = nodes[1:-1] + ds * force
        rhs[0] += a[0] * nodes[0]
        rhs[-1] += a[-1] * nodes[-1]
        new[1:-1] = solve_tridiagonal(-a, 1.0 + 2.0 * a, -a, rhs)
    _check_finite(new)
    return reparametrize_equal_arclength(Path(new)).nodes


def _step_size(config, n_segments, kin_max):
    if config.ds is not None:
        return float(config.ds)
    if config.scheme == "semi-implicit":
        return 0.01
    return min(0.01, explicit_step_limit(n_segments, kin_max))


def _public_step(model, path, energy, config, scheme):
    nodes = np.array(path.nodes)
    u = model.path_potential(nodes)
    cfg = config if config is not None else SolverConfig(n_segments=path.n_segments)
    ds = _step_size(cfg, path.n_segments, float(np.max(energy - u)))
    return Path(_advance(model, nodes, u, energy, ds, scheme, cfg.nongradient_form))


def egma_step_explicit(model, path, energy, config=None):
    """One explicit relaxation step followed by equal-arclength resampling.

    Raises :class:`Divergence` if the update is not finite.
    """
    return _public_step(model, path, energy, config, "explicit")


def egma_step_semi_implicit(model, path, energy, config=None):
    """One step with ``phi''`` taken at the new time level.

    Solves ``(I - 2 ds K D^2) phi~ = phi + ds * forcing`` with Dirichlet rows
    at the endpoints (one tridiagonal elimination shared by all coordinates),
    then resamples to equal arclength.
    """
    return _public_step(model, path, energy, config, "semi-implicit")


def euler_lagrange_residual(model, path, energy=None, nongradient_form="consistent"):
    """Max-norm of the discrete Euler-Lagrange operator at the interior nodes."""
    nodes = np.asarray(path.nodes)
    u = model.path_potential(nodes)
    if energy is None:
        energy = float(u.max())
    kin, d2, force = _forcing(model, nodes, u, energy, nongradient_form)
    op = 2.0 * kin[:, None] * d2 + force
    return float(np.max(np.abs(op)))


def _default_stride(n):
    return 1 if n <= 1000 else 10


def egma_run(model, initial, config, callback=None):
    """Iterate EGMA from ``initial`` until convergence, divergence or ``max_iters``.

    Parameters
    ----------
    model : Model
    initial : Path
        Its first and last nodes are the fixed endpoints.
    config : SolverConfig
    callback : callable, optional
        Called as ``callback(n, nodes, energy, residual)`` at every recorded
        iteration (including ``n = 0`` and the final one).

    Returns
    -------
    IterationTrace
    """
    if initial.n_segments != config.n_segments:
        raise ValueError(
            f"initial path has {initial.n_segments} segments, config expects {config.n_segments}"
        )
    if initial.dim != model.dim:
        raise ValueError(f"path dimension {initial.dim} does not match model dimension {model.dim}")
    nodes = np.array(initial.nodes)
    u = model.path_potential(nodes)
    energy = float(u.max())

    its, ens, res, mabs = [], [], [], []
    violations = []

    def record(n, residual):
        its.append(n)
        ens.append(energy)
        res.append(residual)
        mabs.append(np.max(np.abs(nodes), axis=0))
        if callback is not None:
            callback(n, nodes, energy, residual)

    record(0, np.nan)
    status, message = "max-iters", ""
    residual = np.nan
    last_recorded = 0
    n = 0
    # a diverging run overflows on its way out; that is reported through
    # the status, not as floating-point warnings
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for n in range(1, int(config.max_iters) + 1):
            ds = _step_size(config, initial.n_segments, float(np.max(energy - u)))
            try:
                new = _advance(model, nodes, u, energy, ds, config.scheme, config.nongradient_form)
                new_u = model.path_potential(new)
            except (Divergence, FloatingPointError, ModelError, PathError) as exc:
                status, message = "diverged", str(exc)
                n -= 1
                break
            residual = float(np.max(np.abs(new - nodes))) / ds
            prev = energy
            nodes, u = new, new_u
            energy = float(u.max())
            if energy < prev - 1e-12 * (1.0 + abs(prev)):
                violations.append(n)
            stride = config.record_every or _default_stride(n)
            diverged = (
                not math.isfinite(energy)
                or not math.isfinite(residual)
                or float(np.max(np.linalg.norm(nodes, axis=1))) > config.divergence_radius
                or energy > config.divergence_energy
            )
            converged = residual < config.tol
            if diverged:
                status = "diverged"
                message = f"left the divergence region at iteration {n} (E={energy:.6g})"
            elif converged:
                status = "converged"
            if diverged or converged or n % stride == 0 or n == config.max_iters:
                record(n, residual)
                last_recorded = n
            if diverged or converged:
                break
    if last_recorded != n:
        record(n, residual)

    if violations and model.kind != "gradient":
        warnings.warn(
            f"energy decreased at {len(violations)} iteration(s) of a non-gradient run",
            RuntimeWarning,
            stacklevel=2,
        )
    log.debug("egma_run finished: %s after %d iterations, E=%.12g", status, n, energy)
    return IterationTrace(
        iterations=np.asarray(its, dtype=int),
        energies=np.asarray(ens),
        residuals=np.asarray(res),
        max_abs=np.asarray(mabs),
        status=status,
        iterations_run=n,
        final_path=Path(nodes),
        final_energy=energy,
        final_residual=residual,
        scheme=config.scheme,
        message=message,
        monotone_violations=violations,
    )


def with_updates(config, **changes):
    """Copy of ``config`` with some fields replaced."""
    return replace(config, **changes)
