"""Trajectories of ACVI and the projected baselines on the 2-D bilinear game.

Writes one CSV per method plus a combined distance-to-solution plot.
"""
import argparse
from pathlib import Path

import numpy as np

from cvisolve.acvi import acvi_run
from cvisolve.baselines import run_baseline
from cvisolve.core import AcviConfig
from cvisolve.harness.output import svg_line_plot, write_trace_csv
from cvisolve.problems import make_cbg
from cvisolve.vacvi import vacvi_run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/cbg_figure")
    ap.add_argument("--start", type=float, nargs=2, default=[3.0, 3.0])
    args = ap.parse_args()
    out = Path(args.out)
    p = make_cbg()
    x0 = np.array(args.start)
    cfg = AcviConfig.from_runs([(19, 1), (1, 31)], beta=0.08, mu_init=1e-5, delta=0.5, y_init=x0)
    traces = {
        "ACVI": acvi_run(p, cfg),
        "v-ACVI": vacvi_run(p, cfg),
        "GDA": run_baseline(p, "gda", 0.1, 50, x0=x0),
        "EG": run_baseline(p, "eg", 0.1, 50, x0=x0),
        "OGDA": run_baseline(p, "ogda", 0.1, 50, x0=x0),
        "LA5-GDA": run_baseline(p, "la", 0.1, 50, x0=x0, k=5, alpha=0.5),
    }
    series = {}
    for label, tr in traces.items():
        write_trace_csv(tr, out / f"{label}.csv")
        d = tr.metric("dist_to_solution")
        series[label] = (np.arange(len(d)), d)
        X = tr.xs()
        clamped = int(np.sum(np.any(X == 0.0, axis=1)))
        print(f"{label:8s} dist after 1 step {d[1]:.4f}  after 50 {d[-1]:.4g}  "
              f"boundary iterates {clamped}")
    svg_line_plot(series, out / "dist_to_solution.svg", ylabel="distance to (0, 0)",
                  title="bilinear game on the orthant")


if __name__ == "__main__":
    main()
