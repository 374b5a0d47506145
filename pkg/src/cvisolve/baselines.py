"""Projection-based first-order baselines and Frank-Wolfe for zero-sum games."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import metrics
from .core import (
    LinearInequalities,
    MissingLMO,
    NonTerminating,
    SolverTrace,
    TraceRecord,
    as_vector,
    block_slices,
)
from .linops import affine_project, build_equality_projector

# ---------------------------------------------------------------------------
# Euclidean projections


def project_orthant(v):
    return np.maximum(v, 0.0)


def project_box(v, lower, upper):
    return np.minimum(np.maximum(v, lower), upper)


def project_ball(v, center, radius):
    d = v - center
    nd = np.linalg.norm(d)
    if nd <= radius:
        return np.array(v, dtype=float, copy=True)
    return center + d * (radius / nd)


def project_simplex(v, total=1.0):
    """Sort-and-threshold projection onto {x >= 0, sum(x) = total}."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    idx = np.arange(1, v.shape[0] + 1)
    rho = np.flatnonzero(u - css / idx > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def project_simplex_blocks(v, blocks, lower=0.0, total=1.0):
    """Blockwise projection onto {x >= lower, sum(x_block) = total}."""
    out = np.empty_like(v, dtype=float)
    for sl in block_slices(blocks):
        size = sl.stop - sl.start
        out[sl] = project_simplex(v[sl] - lower, total - lower * size) + lower
    return out


def greedy_violation(A, b, x):
    """Largest normalized violation max_j (a_j^T x - b_j)_+ / ||a_j||."""
    viol = (A @ x - b) / np.linalg.norm(A, axis=1)
    return max(0.0, float(viol.max(initial=0.0)))


def greedy_project(A, b, theta, eps=1e-8, max_iters=None, directions=None):
    """Greedy projection onto {A x <= b}: repeatedly step onto the most violated hyperplane.

    ``directions`` replaces the row normals as step directions (used to stay
    inside an affine subspace). Raises NonTerminating past the iteration cap.
    """
    theta = np.array(theta, dtype=float, copy=True)
    norms = np.linalg.norm(A, axis=1)
    D = A if directions is None else directions
    dnorm2 = np.einsum("ij,ij->i", D, D)
    a_dot_d = np.einsum("ij,ij->i", A, D)
    v0 = greedy_violation(A, b, theta)
    if max_iters is None:
        m = A.shape[0]
        max_iters = 10 * m * max(1, math.ceil(math.log(max(v0, eps) / eps)))
    for _ in range(max_iters + 1):
        viol = (A @ theta - b) / norms
        i = int(np.argmax(viol))
        if viol[i] <= 0 or viol[i] < eps:
            return theta
        excess = A[i] @ theta - b[i]
        if directions is None:
            theta -= excess / dnorm2[i] * D[i]
        else:
            theta -= excess / a_dot_d[i] * D[i]
    raise NonTerminating(
        f"greedy projection exceeded {max_iters} iterations (violation {viol.max():.3e})"
    )


PROJECTION_KINDS = (
    "exact_orthant",
    "exact_box",
    "exact_ball",
    "exact_simplex",
    "exact_shifted_simplex",
    "greedy_linear",
    "composite",
)


@dataclass(frozen=True)
class ProjectionOracle:
    """Projection onto a constraint set; see ``PROJECTION_KINDS``.

    ``composite`` projects onto ``C x = d`` and then runs the greedy loop with
    row normals projected onto the null space of C, so equalities stay exact.
    """

    kind: str
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    radius: Optional[float] = None
    blocks: tuple = ()
    A: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    eps: float = 1e-8
    C: Optional[np.ndarray] = None
    d: Optional[np.ndarray] = None
    parts: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in PROJECTION_KINDS:
            raise ValueError(f"unknown projection kind {self.kind!r}")

    def __call__(self, v):
        return project(self, v)


def composite_oracle(A, b, C, d, eps=1e-8):
    """Equality-then-greedy oracle with the null-space step directions precomputed."""
    proj = build_equality_projector(C, d)
    directions = proj.apply(np.asarray(A, dtype=float).T).T
    return ProjectionOracle(
        "composite", A=A, b=b, eps=eps, C=C, d=d, parts=(proj, directions)
    )


def project(oracle, v):
    v = np.asarray(v, dtype=float)
    kind = oracle.kind
    if kind == "exact_orthant":
        return project_orthant(v)
    if kind == "exact_box":
        return project_box(v, oracle.lower, oracle.upper)
    if kind == "exact_ball":
        return project_ball(v, oracle.center, oracle.radius)
    if kind == "exact_simplex":
        return project_simplex_blocks(v, oracle.blocks or (v.shape[0],), 0.0, 1.0)
    if kind == "exact_shifted_simplex":
        return project_simplex_blocks(v, oracle.blocks or (v.shape[0],), -1.0, 0.0)
    if kind == "greedy_linear":
        return greedy_project(oracle.A, oracle.b, v, oracle.eps)
    if kind == "composite":
        if oracle.parts is None:
            raise ValueError("build composite oracles with composite_oracle()")
        proj, directions = oracle.parts
        x = affine_project(proj, v)
        return greedy_project(oracle.A, oracle.b, x, oracle.eps, directions=directions)
    raise ValueError(kind)


def oracle_for(problem, eps=1e-8):
    """Pick the projection matching a problem's constraint structure."""
    cons = problem.constraints
    tag = cons.structure
    if tag.kind == "orthant" and cons.p == 0:
        return ProjectionOracle("exact_orthant")
    if tag.kind == "box" and cons.p == 0:
        return ProjectionOracle("exact_box", lower=tag.lower, upper=tag.upper)
    if tag.kind == "euclidean_ball" and cons.p == 0:
        return ProjectionOracle("exact_ball", center=tag.center, radius=tag.radius)
    if tag.kind == "simplex":
        return ProjectionOracle("exact_simplex", blocks=tag.blocks)
    if tag.kind == "shifted_simplex":
        return ProjectionOracle("exact_shifted_simplex", blocks=tag.blocks)
    if not all(isinstance(b, LinearInequalities) for b in cons.inequalities):
        raise ValueError(f"no projection available for {problem.name!r}")
    A = np.vstack([b.A for b in cons.inequalities])
    b = np.concatenate([b.b for b in cons.inequalities])
    if cons.p == 0:
        return ProjectionOracle("greedy_linear", A=A, b=b, eps=eps)
    return composite_oracle(A, b, cons.C, cons.d, eps)


# ---------------------------------------------------------------------------
# Steps


def gda_step(x, F, gamma, proj):
    return proj(x - gamma * F(x))


def eg_step(x, F, gamma, proj):
    x_half = proj(x - gamma * F(x))
    return proj(x - gamma * F(x_half))


def ogda_step(x, F_prev, F, gamma, proj):
    """One optimistic step; returns (x_next, F(x)) so the caller can carry F(x)."""
    Fx = F(x)
    if F_prev is None:
        F_prev = Fx
    return proj(x - 2 * gamma * Fx + gamma * F_prev), Fx


class Lookahead:
    """Lookahead wrapper: every k base steps, x <- x_snap + alpha (x_fast - x_snap)."""

    def __init__(self, base_step, k, alpha, proj=None, feasible=None):
        if k < 1 or not 0 <= alpha <= 1:
            raise ValueError("lookahead needs k >= 1 and alpha in [0, 1]")
        self.base_step = base_step
        self.k = k
        self.alpha = alpha
        self.proj = proj
        self.feasible = feasible
        self.snapshot = None
        self.count = 0

    def step(self, x):
        if self.snapshot is None:
            self.snapshot = np.array(x, copy=True)
        x = self.base_step(x)
        self.count += 1
        if self.count % self.k == 0:
            x = self.snapshot + self.alpha * (x - self.snapshot)
            if self.proj is not None and self.feasible is not None and not self.feasible(x):
                x = self.proj(x)
            self.snapshot = np.array(x, copy=True)
        return x


def la_wrap(base_step, k, alpha, proj=None, feasible=None):
    return Lookahead(base_step, k, alpha, proj, feasible)


# ---------------------------------------------------------------------------
# Drivers


def run_baseline(
    problem,
    method,
    gamma,
    iterations,
    oracle=None,
    x0=None,
    k=5,
    alpha=0.5,
    base="gda",
    callback=None,
    max_wall_time_s=None,
):
    """Run gda / eg / ogda / la for ``iterations`` steps from a feasible start."""
    F = problem.field
    proj = oracle if oracle is not None else oracle_for(problem)
    x = as_vector(problem.interior_point if x0 is None else x0, problem.dim)
    echo = {"method": method, "gamma": gamma, "iterations": iterations}
    if method == "la":
        echo.update(k=k, alpha=alpha, base=base)
    trace = SolverTrace(method, config_echo=echo)
    start = time.perf_counter()
    trace.records.append(TraceRecord(0, 0, x.copy(), None, None, 0.0, metrics.evaluate(problem, x)))
    if callback is not None and callback(trace.records[-1]):
        return trace

    if method == "gda":
        def step(x):
            return gda_step(x, F, gamma, proj)
    elif method == "eg":
        def step(x):
            return eg_step(x, F, gamma, proj)
    elif method == "ogda":
        state = {"F_prev": None}

        def step(x):
            x_next, state["F_prev"] = ogda_step(x, state["F_prev"], F, gamma, proj)
            return x_next
    elif method == "la":
        base_steps = {
            "gda": lambda x: gda_step(x, F, gamma, proj),
            "eg": lambda x: eg_step(x, F, gamma, proj),
        }
        if base not in base_steps:
            raise ValueError(f"unsupported lookahead base {base!r}")
        tol = 10 * getattr(proj, "eps", 1e-8)
        la = la_wrap(
            base_steps[base], k, alpha, proj,
            feasible=lambda x: problem.constraints.contains(x, tol),
        )
        step = la.step
    else:
        raise ValueError(f"unknown baseline {method!r}")

    for it in range(1, iterations + 1):
        if max_wall_time_s is not None and time.perf_counter() - start >= max_wall_time_s:
            break
        x = step(x)
        rec = TraceRecord(
            0, it, x.copy(), None, None, time.perf_counter() - start, metrics.evaluate(problem, x)
        )
        trace.records.append(rec)
        if callback is not None and callback(rec):
            break
    return trace


def fw_run(
    problem,
    T,
    eps=0.0,
    gamma_rule="2/(2+t)",
    C=None,
    nu=None,
    x0=None,
    callback=None,
    max_wall_time_s=None,
):
    """Frank-Wolfe for zero-sum games; stops once the FW gap g_t <= eps."""
    if problem.lmo is None:
        raise MissingLMO(f"problem {problem.name!r} has no linear minimization oracle")
    if gamma_rule not in ("2/(2+t)", "adaptive"):
        raise ValueError(f"unknown step rule {gamma_rule!r}")
    if gamma_rule == "adaptive" and (C is None or nu is None):
        raise ValueError("the adaptive step rule needs C and nu")
    z = as_vector(problem.interior_point if x0 is None else x0, problem.dim)
    trace = SolverTrace(
        "fw", config_echo={"method": "fw", "T": T, "eps": eps, "gamma_rule": gamma_rule,
                           "C": C, "nu": nu},
    )
    start = time.perf_counter()
    for t in range(T + 1):
        if max_wall_time_s is not None and t > 0 and time.perf_counter() - start >= max_wall_time_s:
            break
        r = problem.field(z)
        s = problem.lmo(r)
        g = float((z - s) @ r)
        m = metrics.evaluate(problem, z)
        m["gap"] = g
        rec = TraceRecord(0, t, z.copy(), None, None, time.perf_counter() - start, m)
        trace.records.append(rec)
        if g <= eps or (callback is not None and callback(rec)) or t == T:
            break
        if gamma_rule == "2/(2+t)":
            gamma = 2.0 / (2.0 + t)
        else:
            gamma = min(1.0, nu / (2.0 * C) * g)
        z = (1 - gamma) * z + gamma * s
    return trace
