"""Run configuration, orchestration and persistence.

A run is described by a YAML file::

    model:
      name: maier-stein
      params: {epsilon: 0.1, beta: 10}
    endpoints:
      x_s: [-1.0, 0.0]
      x_f: [1.0, 0.0]
    init:
      type: arc          # linear | arc | waypoints | preset
      height: 0.3
    solver:
      n_segments: 1000
      ds: 0.01
    output: runs/ms
    seed: 7              # optional, perturbs the initial path

``endpoints`` may instead be ``{preset: lj7-default}``.  A ``waypoints`` init
takes ``points: [[...], ...]`` inline or ``file: <csv>`` (one point per row,
resolved relative to the config file).  ``perturbation`` (with ``seed``) adds
seeded noise to the interior nodes of the initial path.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np
import yaml

from . import __version__
from .action import action_report, lambda_profile
from .models import MODEL_NAMES, make_model
from .path import Path, equalize_spacing, linear_initial_path, waypoint_initial_path
from .solver import SolverConfig, egma_run

__all__ = [
    "ConfigError",
    "RunConfig",
    "RunRecord",
    "load_config",
    "parse_config",
    "build_model",
    "build_initial_path",
    "execute",
    "write_path_csv",
    "read_path_csv",
    "load_preset",
    "EXIT_CODES",
]

EXIT_CODES = {"converged": 0, "max-iters": 2, "diverged": 3}
INIT_TYPES = ("linear", "arc", "waypoints", "preset")
_SOLVER_FIELDS = tuple(SolverConfig.__dataclass_fields__)


class ConfigError(ValueError):
    """Invalid configuration; carries the offending field and source line."""

    def __init__(self, message, field=None, line=None, source=None):
        self.reason = message
        self.field = field
        self.line = line
        self.source = source
        where = ""
        if source:
            where += f"{source}:"
        if line is not None:
            where += f"{line}:"
        if field:
            where += f" {field}:"
        super().__init__(f"{where} {message}".strip())


# -- YAML with line numbers -------------------------------------------------


def _node_to_python(node, key, lines):
    lines[key] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k_node, v_node in node.value:
            k = k_node.value
            sub = f"{key}.{k}" if key else k
            if k in out:
                raise ConfigError("duplicate key", sub, k_node.start_mark.line + 1)
            out[k] = _node_to_python(v_node, sub, lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_node_to_python(v, f"{key}[{i}]", lines) for i, v in enumerate(node.value)]
    return yaml.SafeLoader(yaml.serialize(node)).get_single_data()


def _load_yaml(text, source=None):
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", line=line, source=source)
    if node is None:
        raise ConfigError("empty configuration", source=source)
    lines = {}
    try:
        data = _node_to_python(node, "", lines)
    except ConfigError as exc:
        raise ConfigError(exc.reason, exc.field, exc.line, source) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", line=1, source=source)
    return data, lines


# -- presets ------------------------------------------------------------------


def load_preset(name):
    """Named data file shipped with the package (``data/<name>.json``)."""
    try:
        text = resources.files("egma").joinpath("data", f"{name}.json").read_text()
    except FileNotFoundError:
        raise KeyError(f"unknown preset {name!r}") from None
    return json.loads(text)


# -- config -------------------------------------------------------------------


@dataclass
class RunConfig:
    """Validated run description (see module docstring for the file format)."""

    model_name: str
    model_params: dict
    x_s: list
    x_f: list
    init: dict
    solver: SolverConfig
    output: str
    seed: int | None = None
    endpoint_preset: str | None = None
    base_dir: str = "."

    def to_dict(self):
        endpoints = (
            {"preset": self.endpoint_preset}
            if self.endpoint_preset
            else {"x_s": list(self.x_s), "x_f": list(self.x_f)}
        )
        return {
            "model": {"name": self.model_name, "params": dict(self.model_params)},
            "endpoints": endpoints,
            "init": dict(self.init),
            "solver": self.solver.to_dict(),
            "output": self.output,
            "seed": self.seed,
        }

    def dump(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _vector(value, key, lines, source):
    if not isinstance(value, list) or not value:
        raise ConfigError("expected a non-empty list of numbers", key, lines.get(key), source)
    try:
        out = [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError("expected a list of numbers", key, lines.get(key), source) from None
    if not all(math.isfinite(v) for v in out):
        raise ConfigError("values must be finite", key, lines.get(key), source)
    return out


def parse_config(data, lines=None, source=None, base_dir="."):
    """Validate a config mapping and return a :class:`RunConfig`."""
    lines = lines or {}

    def err(msg, key):
        return ConfigError(msg, key, lines.get(key), source)

    unknown = set(data) - {"model", "endpoints", "init", "solver", "output", "seed"}
    if unknown:
        key = sorted(unknown)[0]
        raise err("unknown section", key)

    model = data.get("model")
    if not isinstance(model, dict) or "name" not in model:
        raise err("a model section with a name is required", "model")
    name = model["name"]
    if name not in MODEL_NAMES:
        raise err(f"unknown model {name!r}; expected one of {sorted(MODEL_NAMES)}", "model.name")
    params = model.get("params") or {}
    if not isinstance(params, dict):
        raise err("params must be a mapping", "model.params")
    try:
        built = make_model(name, **params)
    except TypeError as exc:
        raise err(f"bad parameter: {exc}", "model.params") from None
    except ValueError as exc:
        raise err(str(exc), "model.params") from None

    endpoints = data.get("endpoints")
    if not isinstance(endpoints, dict):
        raise err("an endpoints section is required", "endpoints")
    preset = endpoints.get("preset")
    if preset is not None:
        try:
            pdata = load_preset(preset)
        except KeyError as exc:
            raise err(str(exc.args[0]), "endpoints.preset") from None
        x_s, x_f = pdata["x_s"], pdata["x_f"]
    else:
        for k in ("x_s", "x_f"):
            if k not in endpoints:
                raise err("missing endpoint", f"endpoints.{k}")
        x_s = _vector(endpoints["x_s"], "endpoints.x_s", lines, source)
        x_f = _vector(endpoints["x_f"], "endpoints.x_f", lines, source)
    for k, v in (("x_s", x_s), ("x_f", x_f)):
        if len(v) != built.dim:
            raise err(f"dimension {len(v)} does not match model dimension {built.dim}", f"endpoints.{k}")

    init = dict(data.get("init") or {"type": "linear"})
    kind = init.get("type", "linear")
    if kind not in INIT_TYPES:
        raise err(f"init type must be one of {INIT_TYPES}", "init.type")
    init["type"] = kind
    if kind == "waypoints":
        if ("points" in init) == ("file" in init):
            raise err("give exactly one of points or file", "init")
        if "file" in init:
            fpath = os.path.join(base_dir, init["file"])
            if not os.path.isfile(fpath):
                raise err(f"file not found: {init['file']}", "init.file")
        else:
            pts = init["points"]
            if not isinstance(pts, list) or len(pts) < 2:
                raise err("need at least two waypoints", "init.points")
            for i, p in enumerate(pts):
                v = _vector(p, f"init.points[{i}]", lines, source)
                if len(v) != built.dim:
                    raise err("waypoint dimension mismatch", f"init.points[{i}]")
    elif kind == "arc":
        try:
            float(init.get("height", 0.3))
        except (TypeError, ValueError):
            raise err("height must be a number", "init.height") from None
        if built.dim != 2 and "normal" not in init:
            raise err("arc init needs a normal vector outside the plane", "init.normal")
    elif kind == "preset":
        if "name" not in init:
            raise err("preset init needs a name", "init.name")
        try:
            load_preset(init["name"])
        except KeyError as exc:
            raise err(str(exc.args[0]), "init.name") from None
    amp = init.get("perturbation", 0.0)
    if not isinstance(amp, (int, float)) or amp < 0:
        raise err("perturbation must be a nonnegative number", "init.perturbation")

    solver = data.get("solver") or {}
    if not isinstance(solver, dict):
        raise err("solver must be a mapping", "solver")
    for k in solver:
        if k not in _SOLVER_FIELDS:
            raise err("unknown solver field", f"solver.{k}")
    try:
        cfg = SolverConfig(**solver)
    except (TypeError, ValueError) as exc:
        bad = next((k for k in solver if k in str(exc)), None)
        raise err(str(exc), f"solver.{bad}" if bad else "solver") from None

    output = data.get("output")
    if not isinstance(output, str) or not output:
        raise err("output directory is required", "output")
    seed = data.get("seed")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
        raise err("seed must be an integer", "seed")

    return RunConfig(
        model_name=name,
        model_params=dict(params),
        x_s=list(map(float, x_s)),
        x_f=list(map(float, x_f)),
        init=init,
        solver=cfg,
        output=output,
        seed=seed,
        endpoint_preset=preset,
        base_dir=base_dir,
    )


def load_config(path):
    """Read and validate a YAML run config; raises :class:`ConfigError`."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=str(path)) from None
    data, lines = _load_yaml(text, source=str(path))
    return parse_config(data, lines, source=str(path), base_dir=os.path.dirname(os.path.abspath(path)))


# -- construction -------------------------------------------------------------


def build_model(config):
    return make_model(config.model_name, **config.model_params)


def _arc(x_s, x_f, height, normal, n):
    chord = x_f - x_s
    if normal is None:
        normal = np.array([-chord[1], chord[0]])
    normal = np.asarray(normal, dtype=float)
    normal = normal / np.linalg.norm(normal)
    s = np.linspace(0.0, 1.0, 20 * n + 1)[:, None]
    pts = x_s + 0.5 * (1.0 - np.cos(np.pi * s)) * chord + height * np.sin(np.pi * s) * normal
    return pts


def build_initial_path(config):
    """Initial path for ``config`` (equally spaced, optionally perturbed)."""
    n = config.solver.n_segments
    x_s, x_f = np.asarray(config.x_s), np.asarray(config.x_f)
    init = config.init
    kind = init["type"]
    if kind == "linear":
        path = linear_initial_path(x_s, x_f, n)
    elif kind == "arc":
        pts = _arc(x_s, x_f, float(init.get("height", 0.3)), init.get("normal"), n)
        path = waypoint_initial_path(pts, n, rtol=1e-10)
    elif kind == "waypoints":
        if "file" in init:
            pts = np.loadtxt(os.path.join(config.base_dir, init["file"]), delimiter=",", ndmin=2)
        else:
            pts = np.asarray(init["points"], dtype=float)
        pts = np.vstack([x_s, pts, x_f]) if init.get("add_endpoints", False) else pts
        path = waypoint_initial_path(pts, n, rtol=1e-10)
    else:
        pts = np.asarray(load_preset(init["name"])["path"], dtype=float)
        path = waypoint_initial_path(pts, n, rtol=1e-10)
    if not (np.array_equal(path.start, x_s) and np.array_equal(path.end, x_f)):
        nodes = np.array(path.nodes)
        if not (np.allclose(nodes[0], x_s, atol=1e-9) and np.allclose(nodes[-1], x_f, atol=1e-9)):
            raise ConfigError("initial path does not join the endpoints", "init")
        nodes[0], nodes[-1] = x_s, x_f
        path = Path(nodes)
    amp = float(init.get("perturbation", 0.0))
    if amp > 0.0:
        rng = np.random.default_rng(config.seed)
        nodes = np.array(path.nodes)
        bump = np.sin(np.pi * path.alpha)[1:-1, None]
        nodes[1:-1] += amp * bump * rng.standard_normal(nodes[1:-1].shape)
        path = equalize_spacing(Path(nodes), rtol=1e-10)
    return path


# -- persistence --------------------------------------------------------------


def _fmt(v):
    return repr(float(v))


def write_path_csv(filename, model, path, energy=None):
    """``alpha,x0..x{d-1},U,lambda`` with round-trip float formatting."""
    u = model.path_potential(path.nodes)
    lam = lambda_profile(model, path, energy).values
    tmp = f"{filename}.tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha"] + [f"x{k}" for k in range(path.dim)] + ["U", "lambda"])
        for a, x, uu, ll in zip(path.alpha, path.nodes, u, lam):
            w.writerow([_fmt(a)] + [_fmt(v) for v in x] + [_fmt(uu), _fmt(ll)])
    os.replace(tmp, filename)


def read_path_csv(filename):
    """Inverse of :func:`write_path_csv`: ``(Path, U, lambda)``."""
    with open(filename, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    d = len(header) - 3
    return Path(body[:, 1 : 1 + d]), body[:, 1 + d], body[:, 2 + d]


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


@dataclass
class RunRecord:
    """What a finished run leaves behind (serialized as ``run.json``)."""

    config: dict
    trace: dict
    artifacts: dict
    wall_seconds: float
    version: str = __version__
    actions: dict = field(default_factory=dict)

    def __post_init__(self):
        # non-finite floats are stored as strings so that JSON round-trips exactly
        for name in ("config", "trace", "artifacts", "actions"):
            setattr(self, name, _json_safe(getattr(self, name)))

    def to_json(self):
        return json.dumps(_json_safe(asdict(self)), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    @property
    def status(self):
        return self.trace["status"]

    @property
    def exit_code(self):
        return EXIT_CODES[self.status]


def execute(config, log=None):
    """Run EGMA for ``config``, writing artifacts into ``config.output``.

    The energy CSV is appended at every recorded iteration and the path CSV
    refreshed every ``record_every`` (default 100) recorded iterations, so an
    interrupted run leaves usable partial output.
    """
    model = build_model(config)
    initial = build_initial_path(config)
    os.makedirs(config.output, exist_ok=True)
    path_csv = os.path.join(config.output, "path.csv")
    energy_csv = os.path.join(config.output, "energy.csv")
    record_json = os.path.join(config.output, "run.json")
    with open(os.path.join(config.output, "config.yaml"), "w") as fh:
        fh.write(config.dump())

    every = config.solver.record_every or 100
    count = [0]
    t0 = time.perf_counter()
    with open(energy_csv, "w", newline="") as efh:
        writer = csv.writer(efh)
        writer.writerow(["iter", "E_n", "residual"])

        def callback(n, nodes, energy, residual):
            writer.writerow([n, _fmt(energy), _fmt(residual)])
            count[0] += 1
            if count[0] % every == 0:
                efh.flush()
                write_path_csv(path_csv, model, Path(nodes))
            if log is not None:
                log(n, energy, residual)

        trace = egma_run(model, initial, config.solver, callback=callback)
    wall = time.perf_counter() - t0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        write_path_csv(path_csv, model, trace.final_path)
        try:
            actions = action_report(model, trace.final_path).to_dict()
        except ValueError:
            actions = {}
    record = RunRecord(
        config=config.to_dict(),
        trace=trace.summary(),
        artifacts={"path_csv": "path.csv", "energy_csv": "energy.csv"},
        wall_seconds=wall,
        actions=actions,
    )
    with open(record_json, "w") as fh:
        fh.write(record.to_json())
    return record, trace
