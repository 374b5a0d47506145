"""Iterations to 2% relative error versus rotational intensity on the 1000-D game.

Thin wrapper over ``cvisolve sweep``; pass another spec to reuse it.
"""
import sys
from pathlib import Path

from cvisolve.harness.cli import main

if __name__ == "__main__":
    spec = sys.argv[1] if len(sys.argv) > 1 else str(Path(__file__).parent / "specs" / "hbg_eta_sweep.yaml")
    sys.exit(main(["sweep", spec]))
