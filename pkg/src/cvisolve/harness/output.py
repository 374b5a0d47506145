"""CSV, JSON and SVG emission.  Every file is written to a temp file and renamed."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from ..metrics import METRIC_NAMES

CSV_COLUMNS = ("iter", "outer", "inner", "wall_time_s") + METRIC_NAMES
NA = "n/a"


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(v):
    """Shortest round-trip text for a float; ``n/a`` for missing values."""
    if v is None:
        return NA
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return NA
    return repr(v)


def _table(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def trace_rows(trace):
    for i, r in enumerate(trace.records):
        yield [i, r.t, r.k, fmt(r.wall_time_s)] + [fmt(r.metrics.get(m)) for m in METRIC_NAMES]


def write_trace_csv(trace, path):
    atomic_write(path, _table(CSV_COLUMNS, trace_rows(trace)))


def write_summary_csv(rows, path):
    header = ("axis_value", "method", "iters_to_threshold", "final_metric", "wall_time_s", "capped")
    out = [
        [fmt(r["axis_value"]), r["method"], r["iters_to_threshold"], fmt(r["final_metric"]),
         fmt(r["wall_time_s"]), "true" if r["capped"] else "false"]
        for r in rows
    ]
    atomic_write(path, _table(header, out))


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def write_trace_json(trace, path):
    doc = {
        "method": trace.method,
        "config": {k: _jsonable(v) for k, v in trace.config_echo.items()},
        "records": [
            {
                "t": r.t, "k": r.k, "wall_time_s": r.wall_time_s,
                "x": _jsonable(r.x), "y": _jsonable(r.y), "lam": _jsonable(r.lam),
                "metrics": {k: _jsonable(v) for k, v in r.metrics.items()},
            }
            for r in trace.records
        ],
    }
    atomic_write(path, json.dumps(doc, indent=1) + "\n")


def read_trace_csv(path):
    """Rows as dicts of floats (None for ``n/a``), keyed by column name."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for row in reader:
            rows.append({k: (None if v == NA else float(v)) for k, v in row.items()})
    return rows


# ---------------------------------------------------------------------------
# SVG line plots

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, n))


def svg_line_plot(series, path, logy=True, xlabel="iteration", ylabel="", title="",
                  width=640, height=420):
    """Polyline plot of ``{label: (xs, ys)}``; non-positive values are dropped on a log axis."""
    left, right, top, bottom = 70, 150, 30, 50
    pw, ph = width - left - right, height - top - bottom
    clean = {}
    for label, (xs, ys) in series.items():
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        ok = np.isfinite(xs) & np.isfinite(ys)
        if logy:
            ok &= ys > 0
        if ok.any():
            clean[label] = (xs[ok], np.log10(ys[ok]) if logy else ys[ok])
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{left + pw / 2}" y="18" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="13">{title}</text>')
    if clean:
        x_lo = min(v[0].min() for v in clean.values())
        x_hi = max(v[0].max() for v in clean.values())
        y_lo = min(v[1].min() for v in clean.values())
        y_hi = max(v[1].max() for v in clean.values())
        if logy:
            y_lo, y_hi = math.floor(y_lo), math.ceil(y_hi)
        if x_hi == x_lo:
            x_hi = x_lo + 1
        if y_hi == y_lo:
            y_hi = y_lo + 1

        def px(x):
            return left + (x - x_lo) / (x_hi - x_lo) * pw

        def py(y):
            return top + ph - (y - y_lo) / (y_hi - y_lo) * ph

        parts.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" '
                     'fill="none" stroke="black"/>')
        yticks = range(int(y_lo), int(y_hi) + 1) if logy else _nice_ticks(y_lo, y_hi)
        for yt in yticks:
            lab = f"1e{int(yt)}" if logy else f"{yt:.3g}"
            parts.append(f'<line x1="{left - 4}" y1="{py(yt):.2f}" x2="{left}" y2="{py(yt):.2f}" '
                         'stroke="black"/>')
            parts.append(f'<text x="{left - 6}" y="{py(yt) + 4:.2f}" text-anchor="end" '
                         f'font-family="sans-serif" font-size="10">{lab}</text>')
        for xt in _nice_ticks(x_lo, x_hi):
            parts.append(f'<text x="{px(xt):.2f}" y="{top + ph + 15}" text-anchor="middle" '
                         f'font-family="sans-serif" font-size="10">{xt:.4g}</text>')
        for i, (label, (xs, ys)) in enumerate(clean.items()):
            color = _COLORS[i % len(_COLORS)]
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, ys))
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                         'stroke-width="1.5"/>')
            ly = top + 14 + 16 * i
            parts.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" '
                         f'stroke="{color}" stroke-width="2"/>')
            parts.append(f'<text x="{left + pw + 35}" y="{ly + 4}" font-family="sans-serif" '
                         f'font-size="11">{label}</text>')
    parts.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12">{xlabel}</text>')
    parts.append(f'<text x="15" y="{top + ph / 2}" text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12" transform="rotate(-90 15 {top + ph / 2})">{ylabel}</text>')
    parts.append("</svg>")
    atomic_write(path, "\n".join(parts) + "\n")
