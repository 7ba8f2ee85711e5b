"""Regenerate the packaged LJ7 preset (``src/egma/data/lj7-default.json``).

Endpoints: the hexagonal minimum with atom 0 in the centre, and the same
minimum with atoms 0 and 1 exchanged (atom 0 on the surface).  Both come from
BFGS descent of the potential with the centre of mass pinned at the origin.

The straight segment between them makes atoms 0 and 1 collide, so the stored
initial path is built from a collision-free guess (the surface ring is dilated
while the 0-1 pair turns half a revolution about its midpoint) relaxed onto a
minimum energy path with a simplified string method: clipped steepest-descent
steps on V followed by equal-arclength resampling.

Usage: python scripts/build_presets.py
"""

import json
import os

import numpy as np
from scipy.optimize import minimize

from egma.models import LJClusterModel
from egma.path import Path, reparametrize_equal_arclength, waypoint_initial_path

N_SEGMENTS = 192
OUT = os.path.join(os.path.dirname(__file__), "..", "src", "egma", "data", "lj7-default.json")


def descend(model, x):
    res = minimize(model.potential, x.ravel(), jac=model.grad_potential, method="BFGS",
                   options={"gtol": 1e-12, "maxiter": 10000})
    pos = res.x.reshape(-1, 2)
    return pos - pos.mean(axis=0)


def swap_pair(cfg, angle, dilation):
    """Turn atoms 0 and 1 about their midpoint; scale the other atoms radially."""
    out = cfg.copy()
    out[2:] *= dilation
    mid = 0.5 * (cfg[0] + cfg[1])
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    out[0] = mid + rot @ (cfg[0] - mid)
    out[1] = mid + rot @ (cfg[1] - mid)
    return out - out.mean(axis=0)


def string_relax(model, path, step=1e-3, max_move=5e-3, tol=1e-10, max_iters=200000):
    nodes = np.array(path.nodes)
    for _ in range(max_iters):
        g = step * model.grad_potential(nodes[1:-1])
        size = np.linalg.norm(g, axis=1, keepdims=True)
        g *= np.minimum(1.0, max_move / np.maximum(size, 1e-300))
        new = nodes.copy()
        new[1:-1] -= g
        new = reparametrize_equal_arclength(Path(new)).nodes
        moved = np.max(np.abs(new - nodes))
        nodes = new
        if moved < tol:
            break
    return Path(nodes)


def main():
    model = LJClusterModel(epsilon=0.0)
    r = 2.0 ** (1.0 / 6.0)
    hexagon = np.vstack([[0.0, 0.0]] + [[r * np.cos(k * np.pi / 3), r * np.sin(k * np.pi / 3)] for k in range(6)])
    x_s = descend(model, hexagon)
    x_f = descend(model, swap_pair(x_s, np.pi, 1.0))

    dil = 1.3
    guess = [x_s, swap_pair(x_s, 0.0, dil)]
    guess += [swap_pair(x_s, a, dil) for a in np.linspace(0.0, np.pi, 17)[1:-1]]
    guess += [swap_pair(x_s, np.pi, dil), x_f]
    path = waypoint_initial_path(np.array([g.ravel() for g in guess]), N_SEGMENTS, rtol=1e-8)
    path = string_relax(model, path)

    data = {
        "description": "LJ7: centre atom 0 -> surface (atoms 0 and 1 exchanged); "
                       "path is a relaxed minimum energy path of V",
        "x_s": x_s.ravel().tolist(),
        "x_f": x_f.ravel().tolist(),
        "V_s": float(model.potential(x_s.ravel())),
        "V_f": float(model.potential(x_f.ravel())),
        "path": path.nodes.tolist(),
    }
    with open(OUT, "w") as fh:
        json.dump(data, fh)
    v = model.potential(path.nodes)
    print(f"wrote {os.path.normpath(OUT)}: V(x_s)={data['V_s']:.6f}, path max V={v.max():.6f}")


if __name__ == "__main__":
    main()
