"""Command-line entry point: ``egma solve|sweep|table1|oracle|gradcheck``."""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .models import MODEL_NAMES, make_model
from .oracles import (
    ms_critical_point,
    quad_case2_fw,
    quad_fw_times,
    quad_graph_limit,
    quad_solution,
)
from .path import waypoint_initial_path
from .runner import (
    ConfigError,
    _load_yaml,
    execute,
    load_config,
    parse_config,
)
from .solver import SolverConfig, egma_run

log = logging.getLogger("egma")

SWEEP_PARAMS = {"beta": "model", "epsilon": "model", "n_segments": "solver", "ds": "solver"}
TABLE1_ITERS = (10, 20, 30, 50, 100)
TABLE1_RESOLUTIONS = (100, 1000, 2000, 4000, 5000)
TABLE1_REFERENCE = {
    "iteration": (2.1e-3, 3.9e-4, 1.5e-4, 8.1e-5, 6.2e-5),
    "resolution": (6.0e-5, 2.0e-5, 3.0e-6, 1.2e-7, 5.3e-9),
}


# -- solve --------------------------------------------------------------------


def cmd_solve(args):
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    def progress(n, energy, residual):
        log.info("iter %d  E=%.12g  residual=%.3e", n, energy, residual)

    record, _ = execute(config, log=progress if args.verbose else None)
    print(json.dumps(record.trace))
    return record.exit_code


# -- sweep --------------------------------------------------------------------


def _parse_value(param, text):
    return int(text) if param == "n_segments" else float(text)


def _sweep_one(job):
    data, lines, source, base_dir, param, value = job
    data = copy.deepcopy(data)
    section = SWEEP_PARAMS[param]
    if section == "model":
        data.setdefault("model", {}).setdefault("params", {})
        data["model"]["params"][param] = value
    else:
        data.setdefault("solver", {})
        data["solver"][param] = value
    data["output"] = os.path.join(data["output"], f"{param}={value}")
    try:
        config = parse_config(data, lines, source=source, base_dir=base_dir)
        record, trace = execute(config)
        return value, record.status, float(trace.final_energy), int(trace.iterations_run), ""
    except Exception as exc:  # one failing run must not abort the sweep
        return value, "error", math.nan, 0, f"{type(exc).__name__}: {exc}"


def run_sweep(config_file, param, values, workers=None):
    """Independent runs over ``values``; returns the summary rows."""
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {sorted(SWEEP_PARAMS)}", "param")
    with open(config_file) as fh:
        data, lines = _load_yaml(fh.read(), source=str(config_file))
    base = os.path.dirname(os.path.abspath(config_file))
    parse_config(copy.deepcopy(data), lines, source=str(config_file), base_dir=base)
    jobs = [(data, lines, str(config_file), base, param, v) for v in values]
    if workers is None:
        workers = min(len(jobs), os.cpu_count() or 1)
    if len(jobs) > 1 and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    os.makedirs(data["output"], exist_ok=True)
    summary = os.path.join(data["output"], f"sweep_{param}.csv")
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["value", "status", "final_energy", "iterations"])
        for value, status, energy, iters, _ in rows:
            w.writerow([value, status, repr(energy), iters])
    return rows, summary


def cmd_sweep(args):
    try:
        values = [_parse_value(args.param, v) for v in args.values.split(",") if v.strip()]
        rows, summary = run_sweep(args.config, args.param, values, args.workers)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: bad --values: {exc}", file=sys.stderr)
        return 1
    for value, status, energy, iters, message in rows:
        line = f"{args.param}={value}: {status}, E={energy:.12g}, iterations={iters}"
        print(line + (f" ({message})" if message else ""))
    print(f"summary: {summary}")
    return 0


# -- table1 -------------------------------------------------------------------


def ms_arc_path(n_segments, height=0.3):
    """Half-ellipse from (-1, 0) to (1, 0) through (0, height), equally spaced."""
    s = np.linspace(0.0, 1.0, 20 * n_segments + 1)
    pts = np.column_stack([-np.cos(np.pi * s), height * np.sin(np.pi * s)])
    return waypoint_initial_path(pts, n_segments, rtol=1e-10)


def table1(epsilon=0.1, beta=10.0, ds=0.01, iterations=500, iteration_n=1000,
           resolutions=TABLE1_RESOLUTIONS, height=0.3, scheme="semi-implicit"):
    """Energy gaps ``E_c - E_n`` (by iteration) and ``E_c - E*_N`` (by resolution).

    Returns a dict with both rows and the fitted exponent of ``E_c - E*_N``
    against ``h = 1/N``.
    """
    model = make_model("maier-stein", epsilon=epsilon, beta=beta)
    _, e_c = ms_critical_point(epsilon)
    limits = {}
    iteration_row = None
    for n in sorted(set(resolutions) | {iteration_n}):
        cfg = SolverConfig(n_segments=n, ds=ds, tol=1e-300, max_iters=iterations,
                           record_every=1, scheme=scheme)
        trace = egma_run(model, ms_arc_path(n, height), cfg)
        if n == iteration_n:
            iteration_row = [e_c - trace.energy_at(k) for k in TABLE1_ITERS]
        limits[n] = e_c - trace.final_energy
    resolution_row = [limits[n] for n in resolutions]
    h = 1.0 / np.asarray(resolutions, dtype=float)
    gaps = np.asarray(resolution_row)
    slope = float(np.polyfit(np.log(h), np.log(gaps), 1)[0]) if np.all(gaps > 0) else math.nan
    return {
        "E_c": e_c,
        "iterations": list(TABLE1_ITERS),
        "iteration_row": iteration_row,
        "resolutions": list(resolutions),
        "resolution_row": resolution_row,
        "slope": slope,
    }


def cmd_table1(args):
    result = table1(iterations=args.iters)
    ref_it, ref_res = TABLE1_REFERENCE["iteration"], TABLE1_REFERENCE["resolution"]
    print(f"E_c = {result['E_c']:.12g}")
    print("n        E_c - E_n    reference")
    for n, v, r in zip(result["iterations"], result["iteration_row"], ref_it):
        print(f"{n:<8d} {v:<12.3e} {r:.1e}")
    print("N        E_c - E*_N   reference")
    for n, v, r in zip(result["resolutions"], result["resolution_row"], ref_res):
        print(f"{n:<8d} {v:<12.3e} {r:.1e}")
    print(f"log-log slope vs h: {result['slope']:.3f}")
    os.makedirs(args.out, exist_ok=True)
    out = os.path.join(args.out, "table1.csv")
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "key", "gap", "reference"])
        for n, v, r in zip(result["iterations"], result["iteration_row"], ref_it):
            w.writerow(["iteration", n, repr(v), r])
        for n, v, r in zip(result["resolutions"], result["resolution_row"], ref_res):
            w.writerow(["resolution", n, repr(v), r])
        w.writerow(["slope", "", repr(result["slope"]), ""])
    print(f"csv: {out}")
    return 0


# -- oracle -------------------------------------------------------------------


def run_oracle(query):
    """Evaluate one closed form; ``query`` is a dict with a ``query`` key."""
    q = dict(query)
    kind = q.pop("query", None)
    if kind == "quad_solution":
        s = quad_solution(q["epsilon"], q["x_s"], q["x_f"], q["T"])
        return {
            "A": s.A.tolist(),
            "B": s.B.tolist(),
            "T": s.T,
            "energy": s.energy,
            "om_action": s.om_action,
            "turning_time": s.turning_time,
            "min_distance_sq": s.min_distance_sq,
        }
    if kind == "quad_graph_limit":
        p = quad_graph_limit(q["x_s"], q["x_f"], q["n_segments"])
        return {"nodes": p.nodes.tolist()}
    if kind == "quad_fw_times":
        t_a, t_b = quad_fw_times(q["x_s"], q["x_f"])
        return {"T_a": t_a, "T_b": t_b}
    if kind == "quad_case2_fw":
        t_c, action, dist = quad_case2_fw(q["R"], q["theta1"], q["theta2"])
        return {"T_c": t_c, "action": action, "min_distance_sq": dist}
    if kind == "ms_critical_point":
        x_c, e_c = ms_critical_point(q["epsilon"])
        return {"x_c_abs": x_c, "E_c": e_c, "points": [[-x_c, 0.0], [x_c, 0.0]]}
    raise KeyError(f"unknown query {kind!r}")


def cmd_oracle(args):
    text = args.query
    if os.path.isfile(text):
        with open(text) as fh:
            text = fh.read()
    try:
        result = run_oracle(json.loads(text))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(result))
    return 0


# -- gradcheck ----------------------------------------------------------------


def sample_points(model, k, rng):
    """Random points inside the region where the model is meant to be used."""
    if model.name == "lj-cluster":
        n = model.n_atoms
        ang = 2.0 * np.pi * np.arange(n - 1) / (n - 1)
        base = np.vstack([[0.0, 0.0], 1.12 * np.column_stack([np.cos(ang), np.sin(ang)])])
        pts = base.ravel() + 0.08 * rng.standard_normal((k, model.dim))
        return pts
    if model.name == "two-channel":
        return rng.uniform([-1.5, -0.5], [1.5, 2.0], size=(k, 2))
    return rng.uniform(-1.5, 1.5, size=(k, model.dim))


def _fd5(f, x, h):
    # fourth-order central stencil, independent of the second-order FD gradient
    out = np.empty_like(x)
    for i in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[i] = h
        out[..., i] = (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)
    return out


def gradcheck(model, k=20, seed=0):
    """Max over points of ``|grad U - oracle| / (1 + |oracle|)`` (inf-norms)."""
    rng = np.random.default_rng(seed)
    x = sample_points(model, k, rng)
    got = model.grad_path_potential(x)
    h = 1e-4 * (1.0 + np.max(np.abs(x), axis=-1, keepdims=True))
    ref = np.stack([_fd5(model.path_potential, x[j], float(h[j, 0])) for j in range(len(x))])
    dev = np.max(np.abs(got - ref), axis=-1) / (1.0 + np.max(np.abs(ref), axis=-1))
    return float(dev.max())


def cmd_gradcheck(args):
    params = {}
    for item in args.param or []:
        key, _, val = item.partition("=")
        try:
            params[key] = float(val) if key not in ("n_atoms", "grad_u") else (
                int(val) if key == "n_atoms" else val)
        except ValueError:
            print(f"error: bad --param {item!r}", file=sys.stderr)
            return 1
    model = make_model(args.model, **params)
    dev = gradcheck(model, args.points, args.seed)
    ok = dev <= 1e-5
    print(json.dumps({"model": args.model, "grad_mode": model.grad_mode, "points": args.points,
                      "max_rel_deviation": dev, "pass": ok}))
    return 0 if ok else 4


# -- entry point --------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="egma", description="Energy-climbing geometric minimization.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run one configuration")
    s.add_argument("config")
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("sweep", help="repeat a run over one parameter")
    s.add_argument("config")
    s.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    s.add_argument("--values", required=True, help="comma-separated list")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("table1", help="Maier-Stein energy convergence table")
    s.add_argument("--out", default=".")
    s.add_argument("--iters", type=int, default=500)
    s.set_defaults(func=cmd_table1)

    s = sub.add_parser("oracle", help="evaluate a closed form (JSON query or file)")
    s.add_argument("query")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("gradcheck", help="compare grad U with a finite-difference oracle")
    s.add_argument("--model", required=True, choices=sorted(MODEL_NAMES))
    s.add_argument("--points", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--param", action="append", help="model parameter key=value")
    s.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
