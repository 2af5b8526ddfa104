"""Run configuration: YAML tree, dotted-key overrides and content hashing."""
from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ConfigurationError
from .hilbert import ModeSpec
from .model import SwitchParams
from .presets import preset

OUTPUT_ENV = "SYMSWITCH_OUTPUT_DIR"

DEFAULTS: dict = {
    "params": {"preset": "fig2_laser_off"},
    "compare": None,
    "numerics": {
        "s_grid": {"min": -0.5, "max": 0.5, "count": 41},
        "q_grid": None,
        "ds": 1e-3,
        "step_ratio": 10.0,
        "current_method": "auto",
        "eig_tol": 1e-10,
        "imag_tol": 1e-8,
        "kink_rtol": 1e-3,
        "zero_threshold": None,
        "symmetry_tol": 1e-12,
        "eigensolver": "auto",
        "truncation": {"cavity_cutoffs": [1, 1, 1], "global_cap": 1},
    },
    "sweep": {"variable": "J", "values": {"min": 1e-3, "max": 1e-1, "count": 9, "log": True}},
    "trajectory": {
        "t_max": 1e6,
        "n_traj": 4,
        "seed": 0,
        "initial": "steady",
        "counted": ["r_emit", "r_abs"],
        "threshold": None,
    },
    "workers": 1,
    "output": {"dir": "symswitch-out", "svg": False},
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_dotted(tree: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        if node.get(k) is None:
            node[k] = {}
        node = node[k]
        if not isinstance(node, dict):
            raise ConfigurationError(f"cannot set {dotted!r}: {k!r} is not a mapping")
    node[keys[-1]] = value


def parse_override(item: str) -> tuple[str, object]:
    """``key.path=value`` with the value parsed as YAML."""
    if "=" not in item:
        raise ConfigurationError(f"override {item!r} must look like key.path=value")
    key, raw = item.split("=", 1)
    return key.strip(), yaml.safe_load(raw)


def grid_values(spec) -> list[float]:
    """Expand ``{min, max, count, log}`` or pass through an explicit list."""
    if spec is None:
        return []
    try:
        vals = _grid(spec)
    except ConfigurationError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigurationError(f"invalid grid {spec!r}: {exc}") from None
    if not vals:
        raise ConfigurationError("grid is empty")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigurationError(f"grid values must be strictly increasing: {vals}")
    return [float(v) for v in vals]


def _grid(spec) -> list[float]:
    if isinstance(spec, (list, tuple)):
        vals = [float(v) for v in spec]
    elif isinstance(spec, dict):
        lo, hi, n = float(spec["min"]), float(spec["max"]), int(spec["count"])
        if n < 1:
            raise ConfigurationError("grid count must be >= 1")
        if n == 1:
            vals = [lo]
        elif spec.get("log"):
            if lo <= 0 or hi <= 0:
                raise ConfigurationError("log grids need positive bounds")
            vals = list(np.geomspace(lo, hi, n))
        else:
            vals = list(np.linspace(lo, hi, n))
    else:
        vals = [float(spec)]
    return vals


def _as_float(value, name: str) -> float:
    # YAML 1.1 reads exponent literals without a dot (1e-3) as strings
    if isinstance(value, bool):
        raise ConfigurationError(f"{name} must be a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name} must be a number, got {value!r}") from None


def resolve_params(block: dict | None) -> SwitchParams | None:
    if block is None:
        return None
    block = dict(block)
    name = block.pop("preset", None)
    base = preset(name).to_dict() if name else {}
    names = {f.name for f in fields(SwitchParams)}
    unknown = set(block) - names
    if unknown:
        raise ConfigurationError(f"unknown parameter(s) {sorted(unknown)}")
    for k, v in block.items():
        if k != "thermal_convention" and v is not None:
            block[k] = _as_float(v, f"params.{k}")
    try:
        return SwitchParams(**{**base, **block})
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


@dataclass(frozen=True)
class RunConfig:
    params: SwitchParams
    compare: SwitchParams | None
    numerics: dict
    sweep: dict
    trajectory: dict
    workers: int
    output: dict
    raw: dict = field(repr=False, compare=False, default_factory=dict)

    @property
    def mode_spec(self) -> ModeSpec:
        t = self.numerics["truncation"]
        return ModeSpec(tuple(t["cavity_cutoffs"]), t.get("global_cap"))

    @property
    def s_grid(self) -> list[float]:
        return grid_values(self.numerics["s_grid"])

    @property
    def output_dir(self) -> Path:
        return Path(self.output["dir"])

    def solver_kw(self) -> dict:
        n = self.numerics
        return {"method": n["eigensolver"], "tol": n["eig_tol"], "imag_tol": n["imag_tol"]}

    def snapshot(self) -> dict:
        """Canonical, JSON-ready view of everything that determines results."""
        return {
            "params": self.params.to_dict(),
            "compare": self.compare.to_dict() if self.compare else None,
            "numerics": self.numerics,
            "sweep": self.sweep,
            "trajectory": self.trajectory,
        }

    def content_hash(self, extra: dict | None = None) -> str:
        return content_hash({**self.snapshot(), **(extra or {})})


def content_hash(obj) -> str:
    payload = {"tool_version": __version__, "content": jsonable(obj)}
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def jsonable(obj):
    """Convert numpy scalars/arrays, tuples and non-finite floats for strict JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    if isinstance(obj, Path):
        return str(obj)
    return obj


def load_config(path: str | os.PathLike | None = None, overrides=(), output_dir: str | None = None) -> RunConfig:
    """Defaults, then the YAML file, then ``key=value`` overrides, then the output directory.

    The output directory precedence is: explicit argument, environment
    variable ``SYMSWITCH_OUTPUT_DIR``, config file.
    """
    tree = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigurationError("config file must contain a mapping")
        if "params" in loaded and isinstance(loaded["params"], dict) and "preset" not in loaded["params"]:
            tree["params"] = {}
        tree = _merge(tree, loaded)
    for item in overrides:
        key, value = parse_override(item) if isinstance(item, str) else item
        set_dotted(tree, key, value)
    env = os.environ.get(OUTPUT_ENV)
    if output_dir is not None:
        tree["output"]["dir"] = str(output_dir)
    elif env:
        tree["output"]["dir"] = env
    return build_config(tree)


def build_config(tree: dict) -> RunConfig:
    known = set(DEFAULTS)
    unknown = set(tree) - known
    if unknown:
        raise ConfigurationError(f"unknown config section(s) {sorted(unknown)}")
    params = resolve_params(tree["params"])
    compare = resolve_params(tree.get("compare"))
    num = tree["numerics"]
    for key in ("ds", "step_ratio", "eig_tol", "imag_tol", "kink_rtol", "symmetry_tol"):
        num[key] = _as_float(num[key], f"numerics.{key}")
        if not num[key] > 0:
            raise ConfigurationError(f"numerics.{key} must be positive")
    if num.get("zero_threshold") is not None:
        num["zero_threshold"] = _as_float(num["zero_threshold"], "numerics.zero_threshold")
        if not num["zero_threshold"] > 0:
            raise ConfigurationError("numerics.zero_threshold must be positive")
    if num["current_method"] not in ("auto", "richardson", "perturbative"):
        raise ConfigurationError("numerics.current_method must be auto, richardson or perturbative")
    if num["eigensolver"] not in ("auto", "dense", "iterative"):
        raise ConfigurationError("numerics.eigensolver must be auto, dense or iterative")
    grid_values(num["s_grid"])
    if num.get("q_grid") is not None:
        grid_values(num["q_grid"])
    t = num["truncation"]
    ModeSpec(tuple(t["cavity_cutoffs"]), t.get("global_cap"))
    sw = tree["sweep"]
    vals = grid_values(sw["values"])
    if sw.get("variable", "J") == "J" and any(v <= 0 for v in vals):
        raise ConfigurationError("J grid must be positive")
    if sw.get("variable", "J") not in {f.name for f in fields(SwitchParams)}:
        raise ConfigurationError(f"cannot sweep unknown parameter {sw['variable']!r}")
    tr = tree["trajectory"]
    tr["t_max"] = _as_float(tr["t_max"], "trajectory.t_max")
    if tr.get("threshold") is not None:
        tr["threshold"] = _as_float(tr["threshold"], "trajectory.threshold")
    if not tr["t_max"] > 0 or int(tr["n_traj"]) < 1:
        raise ConfigurationError("trajectory.t_max must be > 0 and trajectory.n_traj >= 1")
    workers = int(tree.get("workers", 1))
    if workers < 1:
        raise ConfigurationError("workers must be >= 1")
    return RunConfig(params, compare, num, sw, tr, workers, tree["output"], tree)


def example_config() -> str:
    """A commented YAML template covering every section."""
    return yaml.safe_dump(DEFAULTS, sort_keys=False)
