"""Command-line entry point: run, sweep, compare, list-problems, list-methods."""
from __future__ import annotations

import argparse
import sys

from ..problems import PROBLEM_DESCRIPTIONS
from .output import read_trace_csv
from .registry import METHOD_DESCRIPTIONS
from .runner import (
    EXIT_INVALID,
    EXIT_OK,
    build_spec_problem,
    compare_traces,
    run_spec,
    run_sweep,
)
from .spec import SpecError, load_spec


def _load(path, want_sweep):
    spec = load_spec(path)
    if want_sweep and spec.sweep is None:
        raise SpecError("sweep needs a 'sweep' block")
    if not want_sweep and spec.sweep is not None:
        raise SpecError("spec has a 'sweep' block; use the sweep subcommand")
    values = spec.sweep["values"] if spec.sweep else [None]
    for v in values:
        sub = spec.with_overrides(spec.sweep["axis"], v) if spec.sweep else spec
        try:
            build_spec_problem(sub)
        except (TypeError, ValueError, KeyError) as e:
            raise SpecError(f"problem {spec.problem['name']!r}: {e}") from None
    return spec


def cmd_run(args):
    spec = _load(args.spec, want_sweep=False)
    code, res = run_spec(spec)
    last = res.trace.final if res.trace.records else None
    print(f"{res.label}: {len(res.trace.records)} rows -> {res.csv_path}")
    if last is not None:
        shown = {k: v for k, v in last.metrics.items() if v is not None and k != "mu"}
        print("final " + " ".join(f"{k}={v:.6g}" for k, v in shown.items()))
    if res.error:
        print(f"solver error: {res.error}", file=sys.stderr)
    return code


def cmd_sweep(args):
    spec = _load(args.spec, want_sweep=True)
    code, rows = run_sweep(spec, workers=args.workers)
    print(f"{'axis_value':>12} {'method':>10} {'iters':>7} {'final':>12} capped")
    for r in rows:
        final = "n/a" if r["final_metric"] is None else f"{r['final_metric']:.4g}"
        print(f"{r['axis_value']!s:>12} {r['method']:>10} {r['iters_to_threshold']:>7} "
              f"{final:>12} {str(r['capped']).lower()}")
    return code


def cmd_compare(args):
    a, b = read_trace_csv(args.a), read_trace_csv(args.b)
    report, unmatched = compare_traces(a, b)
    worst = 0.0
    print(f"{'column':>20} {'max_abs_dev':>14} {'mean_abs_dev':>14}")
    for col, (mx, mean) in report.items():
        worst = max(worst, mx)
        print(f"{col:>20} {mx:>14.6g} {mean:>14.6g}")
    if unmatched:
        print(f"{unmatched} row(s) present in only one file")
    ok = worst <= args.tol and not unmatched
    print("within tolerance" if ok else f"exceeds tolerance {args.tol:g}")
    return EXIT_OK if ok else 1


def cmd_list_problems(args):
    for name, desc in PROBLEM_DESCRIPTIONS.items():
        print(f"{name:12s} {desc}")
    return EXIT_OK


def cmd_list_methods(args):
    for name, desc in METHOD_DESCRIPTIONS.items():
        print(f"{name:13s} {desc}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="cvisolve", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="execute one experiment spec")
    p.add_argument("spec")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="execute a spec with a sweep block")
    p.add_argument("spec")
    p.add_argument("--workers", type=int, default=None,
                   help="process count (default: CVI_SOLVE_THREADS or CPU count)")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("compare", help="metric deviations between two trace CSVs")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--tol", type=float, default=0.0)
    p.set_defaults(func=cmd_compare)
    sub.add_parser("list-problems").set_defaults(func=cmd_list_problems)
    sub.add_parser("list-methods").set_defaults(func=cmd_list_methods)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecError as e:
        print(f"invalid spec: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
