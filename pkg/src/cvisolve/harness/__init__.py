"""Experiment specs, orchestration and CSV/SVG output."""
from .runner import execute, run_spec, run_sweep
from .spec import ExperimentSpec, SpecError, load_spec, parse_spec
