"""Experiment spec files: a YAML subset of nested ``key: value`` maps and lists.

Top-level keys
  problem:  {name, params, seed}
  method:   {name, ...hyperparameters}     or  methods: [ {...}, ... ]
  budget:   {max_iters, max_wall_time_s}   at least one
  stop:     {metric, threshold}            optional; halts once metric <= threshold
  outputs:  {dir, csv, svg, svg_metric, svg_x, trace_dump, summary_csv}
  sweep:    {axis: eta | time_budget | error_threshold, values: [...]}
  run_seed: integer, default 0
"""
from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from ..metrics import METRIC_NAMES


class SpecError(ValueError):
    """Raised for specs that do not parse or do not validate."""


class _Loader(yaml.SafeLoader):
    pass


# YAML 1.1 leaves "1e-5" as a string; accept exponent floats without a dot.
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)

SWEEP_AXES = ("eta", "time_budget", "error_threshold")
SVG_X_AXES = ("iter", "wall_time_s")
_TOP_KEYS = {"problem", "method", "methods", "budget", "stop", "outputs", "sweep", "run_seed"}
_OUTPUT_KEYS = {"dir", "csv", "svg", "svg_metric", "svg_x", "trace_dump", "summary_csv"}


@dataclass
class ExperimentSpec:
    problem: dict
    methods: list
    budget: dict
    stop: Optional[dict] = None
    outputs: dict = field(default_factory=dict)
    sweep: Optional[dict] = None
    run_seed: int = 0
    source: Optional[Path] = None

    @property
    def method(self):
        return self.methods[0]

    @property
    def out_dir(self):
        d = Path(self.outputs.get("dir", "."))
        if not d.is_absolute() and self.source is not None:
            d = self.source.parent / d
        return d

    def output_path(self, key, default=None):
        name = self.outputs.get(key, default)
        if name is None:
            return None
        p = Path(name)
        return p if p.is_absolute() else self.out_dir / p

    def with_overrides(self, axis, value):
        """Copy with one sweep axis value applied."""
        spec = copy.deepcopy(self)
        spec.sweep = None
        if axis == "eta":
            spec.problem.setdefault("params", {})["eta"] = value
        elif axis == "time_budget":
            spec.budget["max_wall_time_s"] = value
        elif axis == "error_threshold":
            if spec.stop is None:
                raise SpecError("error_threshold sweep needs a stop block")
            spec.stop["threshold"] = value
        return spec


def _require_map(obj, where):
    if not isinstance(obj, dict):
        raise SpecError(f"{where} must be a mapping")
    return obj


def parse_spec(text, source=None):
    from ..problems import PROBLEMS
    from .registry import METHODS

    try:
        raw = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as e:
        raise SpecError(f"spec does not parse: {e}") from None
    raw = _require_map(raw, "spec")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise SpecError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")

    problem = _require_map(raw.get("problem"), "problem")
    if problem.get("name") not in PROBLEMS:
        raise SpecError(f"unknown problem name {problem.get('name')!r}")
    problem.setdefault("params", {})
    _require_map(problem["params"], "problem.params")

    if ("method" in raw) == ("methods" in raw):
        raise SpecError("give exactly one of 'method' or 'methods'")
    methods = [raw["method"]] if "method" in raw else raw["methods"]
    if not isinstance(methods, list) or not methods:
        raise SpecError("methods must be a non-empty list")
    for i, m in enumerate(methods):
        _require_map(m, f"methods[{i}]")
        if m.get("name") not in METHODS:
            raise SpecError(f"unknown method name {m.get('name')!r}")
        METHODS[m["name"]].check(m)

    budget = _require_map(raw.get("budget"), "budget")
    extra = set(budget) - {"max_iters", "max_wall_time_s"}
    if extra:
        raise SpecError(f"unknown budget key(s): {', '.join(sorted(extra))}")
    if budget.get("max_iters") is None and budget.get("max_wall_time_s") is None:
        raise SpecError("budget needs max_iters or max_wall_time_s")
    mi = budget.get("max_iters")
    if mi is not None and (not isinstance(mi, int) or mi < 0):
        raise SpecError("budget.max_iters must be a non-negative integer")

    stop = raw.get("stop")
    if stop is not None:
        _require_map(stop, "stop")
        if stop.get("metric") not in METRIC_NAMES:
            raise SpecError(f"unknown stop metric {stop.get('metric')!r}")
        if not isinstance(stop.get("threshold"), (int, float)):
            raise SpecError("stop.threshold must be a number")

    outputs = _require_map(raw.get("outputs", {}), "outputs")
    extra = set(outputs) - _OUTPUT_KEYS
    if extra:
        raise SpecError(f"unknown output key(s): {', '.join(sorted(extra))}")
    if outputs.get("svg_metric", "dist_to_solution") not in METRIC_NAMES:
        raise SpecError(f"unknown svg_metric {outputs['svg_metric']!r}")
    if outputs.get("svg_x", "iter") not in SVG_X_AXES:
        raise SpecError(f"svg_x must be one of {SVG_X_AXES}")

    sweep = raw.get("sweep")
    if sweep is not None:
        _require_map(sweep, "sweep")
        if sweep.get("axis") not in SWEEP_AXES:
            raise SpecError(f"unknown sweep axis {sweep.get('axis')!r}")
        if not isinstance(sweep.get("values"), list) or not sweep["values"]:
            raise SpecError("sweep.values must be a non-empty list")
        if sweep["axis"] == "error_threshold" and stop is None:
            raise SpecError("error_threshold sweep needs a stop block")
    elif len(methods) > 1:
        raise SpecError("several methods are only allowed in a sweep")

    run_seed = raw.get("run_seed", 0)
    if not isinstance(run_seed, int):
        raise SpecError("run_seed must be an integer")
    return ExperimentSpec(problem, methods, budget, stop, outputs, sweep, run_seed, source)


def load_spec(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise SpecError(f"cannot read spec {path}: {e}") from None
    return parse_spec(text, source=path)
