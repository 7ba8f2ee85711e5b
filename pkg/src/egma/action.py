"""Geometric action functionals evaluated on discrete paths.

Integrals over the normalized arclength ``alpha`` use the composite trapezoid
rule on the node grid.  Path derivatives are central differences at interior
nodes and one-sided at the two endpoints.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .path import endpoint_derivatives

__all__ = [
    "InfeasibleEnergy",
    "ActionReport",
    "LambdaProfile",
    "energy_tolerance",
    "geometric_action",
    "fw_action",
    "lambda_profile",
    "local_minima",
    "implied_transition_time",
    "action_report",
]


class InfeasibleEnergy(ValueError):
    """The path climbs above the prescribed energy level."""


def energy_tolerance(energy):
    return 1e-12 * (1.0 + abs(energy))


def _trapezoid(values, n_segments):
    return float((values.sum() - 0.5 * (values[0] + values[-1])) / n_segments)


def _kinetic(u, energy):
    """``2E - 2U`` clamped at zero, and whether any node is infeasible."""
    two_k = 2.0 * energy - 2.0 * u
    infeasible = bool(np.any(two_k < -2.0 * energy_tolerance(energy)))
    return np.maximum(two_k, 0.0), infeasible


def _drift_work(model, path, dphi):
    """Trapezoid quadrature of ``b(phi) . phi'``."""
    b = model.drift(path.nodes)
    return _trapezoid(np.sum(b * dphi, axis=1), path.n_segments)


def geometric_action(model, path, energy):
    """Geometric (Maupertuis) action at energy ``E``.

    Gradient models integrate ``sqrt(2E - 2U)|phi'|``, the form obtained after
    dropping the constant ``V(x_f) - V(x_s)``.  Non-gradient models also
    subtract the drift work ``b . phi'``.  Returns ``inf`` when ``U`` exceeds
    ``E`` anywhere on the path beyond the feasibility tolerance.
    """
    u = model.path_potential(path.nodes)
    two_k, infeasible = _kinetic(u, energy)
    if infeasible:
        return np.inf
    dphi = endpoint_derivatives(path)
    speed = np.linalg.norm(dphi, axis=1)
    value = _trapezoid(np.sqrt(two_k) * speed, path.n_segments)
    if model.kind != "gradient":
        value -= _drift_work(model, path, dphi)
    return value


def fw_action(model, path):
    """Freidlin-Wentzell geometric action ``int |b||phi'| - b . phi' d alpha``.

    This is the zero-energy geometric action with the noise term dropped from
    the path potential (``U = -|b|^2 / 2``), so it is always finite.  The drift
    work is included for every model; for gradient models it equals
    ``V(x_f) - V(x_s)`` and is evaluated exactly.
    """
    b = model.drift(path.nodes)
    dphi = endpoint_derivatives(path)
    speed = np.linalg.norm(dphi, axis=1)
    value = _trapezoid(np.linalg.norm(b, axis=1) * speed, path.n_segments)
    if model.kind == "gradient":
        value += float(model.potential(path.end) - model.potential(path.start))
    else:
        value -= _trapezoid(np.sum(b * dphi, axis=1), path.n_segments)
    return value


@dataclass(frozen=True, eq=False)
class LambdaProfile:
    """``lambda(alpha_j) = sqrt(2E - 2U) / |phi'|`` and its strict local minima."""

    values: np.ndarray
    critical_indices: np.ndarray
    energy: float


def local_minima(values, rtol=1e-12):
    """Indices of strict local minima, merging plateaus of equal values.

    Values closer than ``rtol`` times the largest finite magnitude count as
    equal, so rounding noise on a flat profile does not create minima.  A
    plateau counts as a minimum when every existing neighbour outside it is
    larger; the reported index is the middle of the plateau.  Endpoints
    compare against their single neighbour.  A plateau covering the whole
    array is not a minimum.
    """
    v = np.asarray(values, dtype=float)
    n = len(v)
    finite = v[np.isfinite(v)]
    tol = rtol * float(np.max(np.abs(finite))) if finite.size else 0.0
    out = []
    start = 0
    while start < n:
        stop = start
        while stop + 1 < n and (v[stop + 1] == v[start] or abs(v[stop + 1] - v[start]) <= tol):
            stop += 1
        left_ok = start == 0 or v[start - 1] > v[start] + tol
        right_ok = stop == n - 1 or v[stop + 1] > v[start] + tol
        if left_ok and right_ok and not (start == 0 and stop == n - 1):
            out.append((start + stop) // 2)
        start = stop + 1
    return np.asarray(out, dtype=int)


def lambda_profile(model, path, energy=None):
    """Indicator of lambda-critical states along ``path``.

    ``energy`` defaults to the node maximum of ``U``.  Nodes whose clamped
    kinetic energy is zero get ``lambda = 0``; nodes with zero speed and
    positive kinetic energy get ``inf``.
    """
    u = model.path_potential(path.nodes)
    if energy is None:
        energy = float(u.max())
    two_k, _ = _kinetic(u, energy)
    two_k[two_k <= 2.0 * energy_tolerance(energy)] = 0.0
    speed = np.linalg.norm(endpoint_derivatives(path), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(two_k == 0.0, 0.0, np.sqrt(two_k) / speed)
    lam = np.where(np.isnan(lam), np.inf, lam)
    return LambdaProfile(values=lam, critical_indices=local_minima(lam), energy=float(energy))


def implied_transition_time(model, path, energy):
    """``T(E) = int |phi'| / sqrt(2E - 2U) d alpha``.

    Returns ``inf`` as soon as one node has kinetic energy within the
    feasibility tolerance of zero (the path touches the level set ``U = E``),
    and ``0`` for a zero-length path.

    Raises
    ------
    InfeasibleEnergy
        If ``U > E`` somewhere on the path.
    """
    u = model.path_potential(path.nodes)
    two_k, infeasible = _kinetic(u, energy)
    if infeasible:
        raise InfeasibleEnergy(
            f"energy {energy!r} is below the path maximum of U ({float(u.max())!r})"
        )
    if path.length() == 0.0:
        return 0.0
    if np.any(two_k <= 2.0 * energy_tolerance(energy)):
        return np.inf
    speed = np.linalg.norm(endpoint_derivatives(path), axis=1)
    return _trapezoid(speed / np.sqrt(two_k), path.n_segments)


@dataclass(frozen=True)
class ActionReport:
    """Action values of a path at its node-maximum energy.

    ``om_action`` is ``geometric_action - energy * implied_time``; with an
    infinite time it is ``-inf`` for positive energy, ``+inf`` for negative
    energy and ``geometric_action`` for zero energy.
    """

    energy: float
    geometric_action: float
    fw_geometric_action: float
    implied_time: float
    om_action: float

    def to_dict(self):
        return {k: _json_float(v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: float(v) for k, v in data.items()})


def _json_float(v):
    v = float(v)
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def action_report(model, path):
    u = model.path_potential(path.nodes)
    energy = float(u.max())
    s_geo = geometric_action(model, path, energy)
    s_fw = fw_action(model, path)
    t = implied_transition_time(model, path, energy)
    if np.isfinite(t):
        s_om = s_geo - energy * t
    elif energy > 0.0:
        s_om = -np.inf
    elif energy < 0.0:
        s_om = np.inf
    else:
        s_om = s_geo
    return ActionReport(
        energy=energy,
        geometric_action=float(s_geo),
        fw_geometric_action=float(s_fw),
        implied_time=float(t),
        om_action=float(s_om),
    )
