"""Forsaken (three constraint variants), ratio game and toy GAN: ACVI against projected EG."""
import argparse
from pathlib import Path

import numpy as np

from cvisolve.acvi import acvi_run
from cvisolve.baselines import run_baseline
from cvisolve.core import AcviConfig
from cvisolve.harness.output import svg_line_plot, write_trace_csv
from cvisolve.problems import make_forsaken, make_ratio_game, make_toy_gan


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--out", default="results/small_games")
    args = ap.parse_args()
    out = Path(args.out)
    ref = dict(beta=0.08, mu_init=1e-5, delta=0.5)
    last = args.steps - 19
    cases = [
        (make_forsaken("ball4"), np.array([0.5, 0.5])),
        (make_forsaken("x1_min"), np.array([0.5, 0.5])),
        (make_forsaken("x2_min"), np.array([0.5, 0.5])),
        (make_ratio_game(), np.full(4, 0.5)),
        (make_toy_gan(1000, 0), np.array([0.5, 0.5])),
    ]
    for p, x0 in cases:
        tag = f"{p.name}_{p.params.get('constraint', '')}".rstrip("_")
        acvi = acvi_run(p, AcviConfig.from_runs([(19, 1), (1, last)], y_init=x0, **ref))
        eg = run_baseline(p, "eg", 0.1, args.steps, x0=x0)
        write_trace_csv(acvi, out / f"{tag}_acvi.csv")
        write_trace_csv(eg, out / f"{tag}_eg.csv")
        X = eg.xs()
        d = np.linalg.norm(X[-100:] - X[-1], axis=1)
        print(f"{tag:16s} ACVI x_K={np.round(acvi.final.x, 4)} ||x-y||="
              f"{acvi.final.metrics['consensus_residual']:.1e}   "
              f"EG x_K={np.round(eg.final.x, 4)} tail amplitude {d.max() - d.min():.3f}")
        if p.lmo is not None:
            svg_line_plot({"ACVI": (np.arange(len(acvi)), acvi.metric("gap")),
                           "EG": (np.arange(len(eg)), eg.metric("gap"))},
                          out / f"{tag}_gap.svg", ylabel="gap", title=tag)


if __name__ == "__main__":
    main()
