"""Evaluation quantities recorded along solver trajectories."""
import numpy as np

from .core import MissingLMO, ZeroReference

# Stable names, also used as CSV column headers.
METRIC_NAMES = (
    "dist_to_solution",
    "relative_error",
    "gap",
    "consensus_residual",
    "lemma_residual",
)


def gap(problem, x):
    """max over the feasible set of <F(x), x - z>, evaluated through the LMO."""
    if problem.lmo is None:
        raise MissingLMO(f"problem {problem.name!r} has no linear minimization oracle")
    x = np.asarray(x, dtype=float)
    g = problem.field(x)
    s = problem.lmo(g)
    return float(g @ x - g @ s)


def distance(x, x_star):
    return float(np.linalg.norm(np.asarray(x) - np.asarray(x_star)))


def relative_error(x, x_star):
    ref = np.linalg.norm(x_star)
    if ref == 0:
        raise ZeroReference("relative error undefined for a zero reference; use distance")
    return float(np.linalg.norm(np.asarray(x) - np.asarray(x_star)) / ref)


def consensus_residual(x, y):
    return float(np.linalg.norm(np.asarray(x) - np.asarray(y)))


def lemma_residual(lam_k, lam_next, y_k, y_next, beta):
    """(1/2b)||lam_next - lam_k||^2 + (b/2)||y_next - y_k||^2; non-increasing for monotone F."""
    dl = np.asarray(lam_next) - np.asarray(lam_k)
    dy = np.asarray(y_next) - np.asarray(y_k)
    return float(dl @ dl / (2 * beta) + 0.5 * beta * (dy @ dy))


def evaluate(problem, x, y=None, lemma=None):
    """All metrics at ``x``; entries that do not apply are None."""
    out = dict.fromkeys(METRIC_NAMES)
    xs = problem.known_solution
    if xs is not None:
        out["dist_to_solution"] = distance(x, xs)
        if np.linalg.norm(xs) > 0:
            out["relative_error"] = relative_error(x, xs)
    if problem.lmo is not None:
        out["gap"] = gap(problem, x)
    if y is not None:
        out["consensus_residual"] = consensus_residual(x, y)
    if lemma is not None:
        out["lemma_residual"] = lemma
    return out
