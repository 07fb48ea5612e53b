"""Run configuration: JSON schema, parsing and cross-field checks."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError
from .grid import GridSpec, build_axes
from .heat import NEUMANN, Dirichlet, HeatOperator
from .initial import InitialCondition
from .kernel import GKernelSpec
from .testfn import TestFunction, evaluate

log = logging.getLogger(__name__)

_NUM = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "spdeclt run configuration",
    "type": "object",
    "required": ["grid", "kernel", "initial_condition", "test_functions", "times"],
    "additionalProperties": False,
    "properties": {
        "grid": {
            "type": "object",
            "required": ["y_min", "y_max", "n_y", "t_max", "n_t", "a_min", "a_max", "n_a"],
            "additionalProperties": False,
            "properties": {
                "y_min": _NUM, "y_max": _NUM, "n_y": {"type": "integer", "minimum": 3},
                "t_max": {"type": "number", "minimum": 0}, "n_t": {"type": "integer", "minimum": 0},
                "a_min": _NUM, "a_max": _NUM, "n_a": _POS_INT,
            },
        },
        "kernel": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["sbm", "fvp", "table"]},
                "K": {"type": "number", "exclusiveMinimum": 0},
                "a_edges": {"type": "array", "items": _NUM},
                "u_breaks": {"type": "array", "items": _NUM},
                "values": {"type": "array", "items": {"type": "array", "items": _NUM}},
            },
        },
        "epsilon": {"oneOf": [{"type": "number", "minimum": 0},
                              {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}}]},
        "initial_condition": {
            "oneOf": [
                {"type": "object", "required": ["kind", "x0"], "additionalProperties": False,
                 "properties": {"kind": {"const": "heaviside"}, "x0": _NUM}},
                {"type": "object", "required": ["kind", "points"], "additionalProperties": False,
                 "properties": {"kind": {"const": "cdf_table"},
                                "points": {"type": "array", "minItems": 1,
                                           "items": {"type": "array", "items": _NUM,
                                                     "minItems": 2, "maxItems": 2}}}},
                {"type": "object", "required": ["kind", "mean", "sd"], "additionalProperties": False,
                 "properties": {"kind": {"const": "density_gaussian"}, "mean": _NUM,
                                "sd": {"type": "number", "exclusiveMinimum": 0}, "mass": _NUM}},
                {"type": "object", "required": ["kind"], "additionalProperties": False,
                 "properties": {"kind": {"const": "zero"}}},
            ]
        },
        "test_functions": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "required": ["kind"],
                "properties": {"kind": {"enum": ["gaussian_bump", "hermite_damped", "plateau"]}},
                "additionalProperties": _NUM,
            },
        },
        "times": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
        "replicates": {"type": "integer", "minimum": 2},
        "master_seed": {"type": "integer", "minimum": 0},
        "workers": _POS_INT,
        "boundary": {
            "type": "object", "required": ["kind"], "additionalProperties": False,
            "properties": {"kind": {"enum": ["default", "neumann", "dirichlet"]},
                           "left": _NUM, "right": _NUM},
        },
        "pairing": {"enum": ["distribution", "measure"]},
        "modes": {"type": "array", "items": {"enum": ["plain", "smoothed"]}, "minItems": 1},
        "moment_scaling": {
            "type": "object", "required": ["t1", "gaps"], "additionalProperties": False,
            "properties": {"t1": {"type": "number", "minimum": 0},
                           "gaps": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                           "function": {"type": "integer", "minimum": 0},
                           "n_boot": _POS_INT},
        },
        "flag_threshold": {"type": "number", "minimum": 0, "maximum": 1},
        "output_dir": {"type": "string"},
        "formats": {"type": "array", "items": {"enum": ["csv", "json"]}, "minItems": 1},
    },
}


def snap_times(spec: GridSpec, times) -> list[int]:
    """Nearest grid indices; warns when a request is more than dt/2 off the grid."""
    out = []
    for t in times:
        t = float(t)
        if t < 0 or t > spec.t_max * (1 + 1e-12):
            raise ConfigError(f"time {t} outside [0, {spec.t_max}]", field="times")
        n = spec.time_index(t)
        off = abs(n * spec.dt - t)
        if spec.n_t and off > 0.5 * spec.dt * (1 + 1e-9):
            log.warning("time %g snapped to %g", t, n * spec.dt)
        elif spec.n_t and off > 1e-12 * max(1.0, t):
            log.info("time %g snapped to grid time %g", t, n * spec.dt)
        out.append(n)
    return out


def edge_warnings(spec: GridSpec, fns, tol: float = 1e-10) -> list[str]:
    """Test functions whose value or slope exceeds ``tol`` at a grid end."""
    ends = build_axes(spec)[0][[0, -1]]
    msgs = []
    for f in fns:
        edge = max(float(np.max(np.abs(evaluate(f, ends, k)))) for k in (0, 1))
        if edge > tol:
            msgs.append(f"{f.label()} is {edge:.2e} at the grid ends; pairings are truncated there")
    return msgs


@dataclass
class RunConfig:
    grid: GridSpec
    kernel: GKernelSpec
    initial: InitialCondition
    test_functions: list
    times: list
    epsilon: list = field(default_factory=lambda: [0.01])
    replicates: int = 200
    master_seed: int = 0
    workers: int = 1
    boundary: dict = field(default_factory=lambda: {"kind": "default"})
    pairing: str = "measure"
    modes: list = field(default_factory=lambda: ["plain", "smoothed"])
    moment_scaling: dict | None = None
    flag_threshold: float = 0.05
    output_dir: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "json"])
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def time_indices(self) -> list[int]:
        return snap_times(self.grid, self.times)

    def operator(self) -> HeatOperator:
        kind = self.boundary.get("kind", "default")
        if kind == "default":
            kind = "dirichlet" if self.kernel.kind == "fvp" else "neumann"
            if kind == "dirichlet":
                return HeatOperator(self.grid, Dirichlet(0.0, 1.0))
        if kind == "neumann":
            return HeatOperator(self.grid, NEUMANN)
        return HeatOperator(self.grid, Dirichlet(float(self.boundary.get("left", 0.0)),
                                                 float(self.boundary.get("right", 1.0))))

    def initial_values(self) -> np.ndarray:
        return self.initial.values(self.grid, self.kernel.kind)

    def to_dict(self) -> dict:
        return dict(self.raw)


def _check_semantics(cfg: RunConfig) -> None:
    spec, kernel = cfg.grid, cfg.kernel
    if kernel.kind == "fvp" and (spec.a_min, spec.a_max) != (0.0, 1.0):
        raise ConfigError("fvp needs (a_min, a_max) = (0, 1)", field="grid.a_min")
    if kernel.kind == "sbm" and not spec.a_min <= 0.0 <= spec.a_max:
        raise ConfigError("sbm needs 0 inside [a_min, a_max]", field="grid.a_min")
    if kernel.kind == "fvp":
        ic = cfg.initial
        if ic.kind == "zero":
            raise ConfigError("fvp needs a distribution function ending at 1", field="initial_condition")
        if ic.kind == "density_gaussian" and not math.isclose(ic.params.get("mass", 1.0), 1.0):
            raise ConfigError("fvp needs total mass 1", field="initial_condition.mass")
        elif ic.kind == "cdf_table" and not math.isclose(ic.params["points"][-1][1], 1.0, abs_tol=1e-8):
            raise ConfigError("fvp cdf table must end at 1", field="initial_condition.points")
    if any(e < 0 for e in cfg.epsilon):
        raise ConfigError("eps must be >= 0", field="epsilon")
    ms = cfg.moment_scaling
    if ms is not None:
        if not ms["gaps"]:
            raise ConfigError("at least one gap is required", field="moment_scaling.gaps")
        if ms["t1"] + max(ms["gaps"]) > spec.t_max * (1 + 1e-12):
            raise ConfigError("t1 + gap exceeds t_max", field="moment_scaling.gaps")
        if ms.get("function", 0) >= len(cfg.test_functions):
            raise ConfigError("function index out of range", field="moment_scaling.function")


def load_config(source, overrides: dict | None = None) -> RunConfig:
    """Parse and validate a config given as a path, JSON text or dict."""
    if isinstance(source, dict):
        raw = json.loads(json.dumps(source))
    else:
        try:
            if isinstance(source, str) and source.lstrip().startswith("{"):
                text = source
            else:
                text = Path(source).read_text()
            raw = json.loads(text)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}", field="config") from None
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = ".".join(str(x) for x in exc.absolute_path) or "config"
        raise ConfigError(exc.message, field=where) from None

    eps = raw.get("epsilon", 0.01)
    cfg = RunConfig(
        grid=GridSpec.from_dict(raw["grid"]),
        kernel=GKernelSpec.from_dict(raw["kernel"]),
        initial=InitialCondition.from_dict(raw["initial_condition"]),
        test_functions=[TestFunction.from_dict(d) for d in raw["test_functions"]],
        times=[float(t) for t in raw["times"]],
        epsilon=[float(e) for e in (eps if isinstance(eps, list) else [eps])],
        replicates=int(raw.get("replicates", 200)),
        master_seed=int(raw.get("master_seed", 0)),
        workers=int(raw.get("workers", 1)),
        boundary=dict(raw.get("boundary", {"kind": "default"})),
        pairing=raw.get("pairing", "measure"),
        modes=list(raw.get("modes", ["plain", "smoothed"])),
        moment_scaling=raw.get("moment_scaling"),
        flag_threshold=float(raw.get("flag_threshold", 0.05)),
        output_dir=raw.get("output_dir", "out"),
        formats=list(raw.get("formats", ["csv", "json"])),
        raw=raw,
    )
    _check_semantics(cfg)
    snap_times(cfg.grid, cfg.times)
    for msg in edge_warnings(cfg.grid, cfg.test_functions):
        log.warning(msg)
    return cfg
