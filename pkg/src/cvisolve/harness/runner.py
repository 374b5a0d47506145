"""Single runs and sweeps."""
from __future__ import annotations

import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..core import CVIError, SolverTrace
from ..problems import build_problem
from .output import atomic_write, fmt, svg_line_plot, write_summary_csv, write_trace_csv, write_trace_json
from .registry import METHODS, method_label

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3


@dataclass
class RunResult:
    label: str
    trace: SolverTrace
    error: Optional[str] = None
    csv_path: Optional[str] = None


def sidecar_path(csv_path):
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + ".err.txt")


def make_stop_callback(stop, sink):
    """Collect every record into ``sink``; request a stop once the metric crosses."""
    metric = stop["metric"] if stop else None
    threshold = float(stop["threshold"]) if stop else None

    def callback(rec):
        sink.append(rec)
        if metric is None:
            return False
        v = rec.metrics.get(metric)
        return v is not None and v <= threshold

    return callback


def build_spec_problem(spec):
    p = spec.problem
    seed = p.get("seed", spec.run_seed)
    return build_problem(p["name"], p.get("params", {}), seed=seed)


def execute(spec, block, csv_path=None, svg_path=None, dump_path=None):
    """Run one method; solver errors are captured, not raised."""
    problem = build_spec_problem(spec)
    label = method_label(block)
    sink = []
    callback = make_stop_callback(spec.stop, sink)
    error = None
    try:
        trace = METHODS[block["name"]].run(problem, block, spec.budget, callback)
    except (CVIError, ValueError, np.linalg.LinAlgError, FloatingPointError) as e:
        trace = SolverTrace(block["name"], records=list(sink))
        error = f"{type(e).__name__}: {e}"
    if csv_path is not None:
        write_trace_csv(trace, csv_path)
        err_path = sidecar_path(csv_path)
        if error is not None:
            last = trace.records[-1] if trace.records else None
            where = f"last recorded (t, k) = ({last.t}, {last.k})" if last else "no records"
            atomic_write(err_path, f"{error}\n{where}\n")
        elif err_path.exists():
            err_path.unlink()
    if dump_path is not None:
        write_trace_json(trace, dump_path)
    if svg_path is not None:
        metric = spec.outputs.get("svg_metric", "dist_to_solution")
        xkey = spec.outputs.get("svg_x", "iter")
        ys = trace.metric(metric)
        xs = (np.arange(len(ys)) if xkey == "iter"
              else np.array([r.wall_time_s for r in trace.records]))
        svg_line_plot({label: (xs, ys)}, svg_path, logy=True,
                      xlabel="iteration" if xkey == "iter" else "wall time (s)",
                      ylabel=metric, title=f"{spec.problem['name']}")
    return RunResult(label, trace, error, None if csv_path is None else str(csv_path))


def run_spec(spec):
    """Execute a non-sweep spec; returns (exit code, RunResult)."""
    csv_path = spec.output_path("csv", "trace.csv")
    res = execute(
        spec, spec.method, csv_path,
        spec.output_path("svg"), spec.output_path("trace_dump"),
    )
    return (EXIT_SOLVER if res.error else EXIT_OK), res


def _slug(text):
    return re.sub(r"[^A-Za-z0-9._-]+", "_", str(text))


def _summary_row(spec, axis_value, res):
    metric = spec.stop["metric"] if spec.stop else spec.outputs.get(
        "svg_metric", "dist_to_solution")
    values = res.trace.metric(metric) if res.trace.records else np.array([])
    hit = None
    if spec.stop is not None:
        ok = np.flatnonzero(values <= float(spec.stop["threshold"]))
        hit = int(ok[0]) if ok.size else None
    cap = spec.budget.get("max_iters")
    if cap is None:
        cap = max(len(res.trace.records) - 1, 0)
    final = float(values[-1]) if values.size and np.isfinite(values[-1]) else None
    wall = res.trace.records[-1].wall_time_s if res.trace.records else 0.0
    return {
        "axis_value": axis_value,
        "method": res.label,
        "iters_to_threshold": cap if hit is None else hit,
        "final_metric": final,
        "wall_time_s": wall,
        "capped": hit is None,
        "error": res.error,
    }


def _sweep_task(args):
    spec, axis_value, index, csv_path, svg_path = args
    sub = spec.with_overrides(spec.sweep["axis"], axis_value)
    res = execute(sub, spec.methods[index], csv_path, svg_path)
    return _summary_row(sub, axis_value, res), res


def sweep_workers():
    env = os.environ.get("CVI_SOLVE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def run_sweep(spec, workers=None):
    """One run per (axis value, method); returns (exit code, summary rows)."""
    axis = spec.sweep["axis"]
    tasks = []
    for value in spec.sweep["values"]:
        for i, block in enumerate(spec.methods):
            stem = f"{_slug(method_label(block))}_{axis}={_slug(fmt(value))}"
            svg = spec.out_dir / f"{stem}.svg" if spec.outputs.get("svg") else None
            tasks.append((spec, value, i, spec.out_dir / f"{stem}.csv", svg))
    workers = sweep_workers() if workers is None else workers
    if workers <= 1 or len(tasks) == 1:
        results = [_sweep_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            results = list(pool.map(_sweep_task, tasks))
    rows = [r for r, _ in results]
    write_summary_csv(rows, spec.output_path("summary_csv", "summary.csv"))
    code = EXIT_SOLVER if any(r["error"] for r in rows) else EXIT_OK
    return code, rows


def compare_traces(rows_a, rows_b, skip=("wall_time_s",)):
    """Per-column max/mean absolute deviation of two traces aligned by ``iter``."""
    by_iter_b = {r["iter"]: r for r in rows_b}
    common = [r for r in rows_a if r["iter"] in by_iter_b]
    unmatched = len(rows_a) + len(rows_b) - 2 * len(common)
    cols = [c for c in (rows_a[0].keys() if rows_a else []) if c not in skip and c != "iter"]
    report = {}
    for c in cols:
        diffs = []
        for ra in common:
            a, b = ra.get(c), by_iter_b[ra["iter"]].get(c)
            if a is None and b is None:
                continue
            diffs.append(np.inf if (a is None or b is None) else abs(a - b))
        if diffs:
            report[c] = (float(np.max(diffs)), float(np.mean(diffs)))
        else:
            report[c] = (0.0, 0.0)
    return report, unmatched
