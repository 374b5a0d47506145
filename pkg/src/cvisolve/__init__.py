"""Constrained variational inequality solvers: ACVI, its variants, and projection baselines."""
from .acvi import acvi_inexact_run, acvi_run
from .baselines import fw_run, oracle_for, run_baseline
from .core import (
    AcviConfig,
    ConstraintSpec,
    CVIError,
    InnerOptimizer,
    ProblemInstance,
    SolverTrace,
    TraceRecord,
    VectorField,
    validate_problem,
)
from .linops import build_equality_projector
from .problems import PROBLEMS, build_problem
from .vacvi import vacvi_run

__version__ = "0.1.0"
