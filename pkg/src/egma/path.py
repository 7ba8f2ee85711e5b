"""Discrete paths, finite-difference derivatives and equal-arclength resampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PathError",
    "Path",
    "PathDerivatives",
    "linear_initial_path",
    "waypoint_initial_path",
    "reparametrize_equal_arclength",
    "equalize_spacing",
    "path_derivatives",
    "endpoint_derivatives",
    "hausdorff_distance",
    "point_polyline_distance",
]


class PathError(ValueError):
    """Invalid path construction or degenerate geometry."""


@dataclass(frozen=True, eq=False)
class Path:
    """Ordered nodes ``phi_0, ..., phi_N``; node ``j`` approximates ``phi(j/N)``.

    The node array is copied and made read-only on construction.
    """

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2:
            raise PathError(f"nodes must be a 2-d array, got shape {nodes.shape}")
        if nodes.shape[0] < 3:
            raise PathError("a path needs at least 3 nodes (N >= 2)")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_segments(self):
        return self.nodes.shape[0] - 1

    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def h(self):
        return 1.0 / self.n_segments

    @property
    def alpha(self):
        return np.linspace(0.0, 1.0, self.n_segments + 1)

    @property
    def start(self):
        return self.nodes[0]

    @property
    def end(self):
        return self.nodes[-1]

    def segment_lengths(self):
        return np.linalg.norm(np.diff(self.nodes, axis=0), axis=1)

    def length(self):
        return float(self.segment_lengths().sum())

    def spacing_deviation(self):
        """Largest relative deviation of a segment length from the mean."""
        seg = self.segment_lengths()
        mean = seg.mean()
        if mean == 0.0:
            return 0.0
        return float(np.max(np.abs(seg - mean)) / mean)

    def __eq__(self, other):
        if not isinstance(other, Path):
            return NotImplemented
        return self.nodes.shape == other.nodes.shape and bool(np.array_equal(self.nodes, other.nodes))

    __hash__ = None


@dataclass(frozen=True)
class PathDerivatives:
    """Central differences at the interior nodes ``j = 1 .. N-1``."""

    first: np.ndarray
    second: np.ndarray


def linear_initial_path(x_s, x_f, n_segments):
    """Straight line with ``nodes[j] = x_s + (j/N)(x_f - x_s)``."""
    n = int(n_segments)
    if n < 2:
        raise PathError("n_segments must be >= 2")
    x_s = np.asarray(x_s, dtype=float)
    x_f = np.asarray(x_f, dtype=float)
    if x_s.shape != x_f.shape or x_s.ndim != 1:
        raise PathError("endpoints must be vectors of equal dimension")
    t = np.arange(n + 1)[:, None] / n
    nodes = x_s + t * (x_f - x_s)
    nodes[-1] = x_f
    return Path(nodes)


def _resample(vertices, n_segments):
    """Algorithm core: ``n_segments + 1`` points equally spaced in arclength along
    the polyline through ``vertices``.

    For target ``l`` the source segment ``i`` satisfies ``L(i) < l <= L(i+1)``;
    ``searchsorted(..., side="left")`` returns exactly ``i + 1``, and the strict
    left inequality skips zero-length segments.
    """
    seg = np.linalg.norm(np.diff(vertices, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if not total > 0.0:
        raise PathError("cannot reparametrize a path of zero length")
    n = int(n_segments)
    targets = np.arange(1, n) * (total / n)
    i = np.searchsorted(cum, targets, side="left") - 1
    i = np.clip(i, 0, len(seg) - 1)
    direction = (vertices[i + 1] - vertices[i]) / seg[i, None]
    out = np.empty((n + 1, vertices.shape[1]))
    out[0] = vertices[0]
    out[-1] = vertices[-1]
    out[1:-1] = vertices[i] + (targets - cum[i])[:, None] * direction
    return out


def reparametrize_equal_arclength(path):
    """Redistribute the interior nodes equally in arclength along the current polyline.

    One pass of linear-interpolation resampling; the endpoints are copied
    unchanged and every new node lies on the input polyline.  Where a new
    segment straddles a corner of the input the chord is shorter than the
    arclength step, so chord lengths are equal only up to that corner cutting;
    :func:`equalize_spacing` iterates to a fixed point.
    """
    return Path(_resample(path.nodes, path.n_segments))


def equalize_spacing(path, rtol=1e-12, max_passes=500):
    """Repeat :func:`reparametrize_equal_arclength` until chords are equal within ``rtol``."""
    current = path
    for _ in range(max_passes):
        if current.spacing_deviation() <= rtol:
            return current
        current = reparametrize_equal_arclength(current)
    if current.spacing_deviation() > rtol:
        raise PathError(
            f"spacing did not equalize within {max_passes} passes "
            f"(deviation {current.spacing_deviation():.2e})"
        )
    return current


def waypoint_initial_path(waypoints, n_segments, rtol=1e-12):
    """Polyline through ``waypoints`` resampled to ``n_segments + 1`` equally spaced nodes.

    Resampling passes are repeated until the chord lengths agree within
    ``rtol``; with only two waypoints this is the straight line.
    """
    pts = np.asarray(waypoints, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise PathError("need at least two waypoints")
    n = int(n_segments)
    if n < 2:
        raise PathError("n_segments must be >= 2")
    if pts.shape[0] == 2:
        return linear_initial_path(pts[0], pts[1], n)
    return equalize_spacing(Path(_resample(pts, n)), rtol=rtol)


def path_derivatives(path):
    """Central differences ``D phi_j`` and ``D^2 phi_j`` with ``h = 1/N``."""
    x = path.nodes
    n = path.n_segments
    first = (x[2:] - x[:-2]) * (0.5 * n)
    second = (x[2:] - 2.0 * x[1:-1] + x[:-2]) * float(n * n)
    return PathDerivatives(first=first, second=second)


def endpoint_derivatives(path):
    """First derivative at every node: central inside, one-sided at the ends."""
    x = path.nodes
    n = path.n_segments
    d = np.empty_like(x)
    d[1:-1] = (x[2:] - x[:-2]) * (0.5 * n)
    d[0] = (x[1] - x[0]) * n
    d[-1] = (x[-1] - x[-2]) * n
    return d


def point_polyline_distance(points, vertices, chunk=2048):
    """Distance from each point to the polyline through ``vertices``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    vertices = np.asarray(vertices, dtype=float)
    a = vertices[:-1]
    ab = vertices[1:] - a
    ab2 = np.sum(ab * ab, axis=1)
    safe = np.where(ab2 > 0.0, ab2, 1.0)
    out = np.empty(len(points))
    for start in range(0, len(points), chunk):
        p = points[start : start + chunk]
        ap = p[:, None, :] - a[None, :, :]
        t = np.where(ab2 > 0.0, np.einsum("psk,sk->ps", ap, ab) / safe, 0.0)
        t = np.clip(t, 0.0, 1.0)
        diff = ap - t[..., None] * ab[None]
        out[start : start + chunk] = np.sqrt(np.min(np.sum(diff * diff, axis=2), axis=1))
    return out


def hausdorff_distance(p1, p2):
    """Symmetric Hausdorff distance between two polylines (nodes against segments)."""
    n1 = p1.nodes if isinstance(p1, Path) else np.asarray(p1, dtype=float)
    n2 = p2.nodes if isinstance(p2, Path) else np.asarray(p2, dtype=float)
    if n1.shape[1] != n2.shape[1]:
        raise PathError("paths live in different dimensions")
    return float(
        max(point_polyline_distance(n1, n2).max(), point_polyline_distance(n2, n1).max())
    )
