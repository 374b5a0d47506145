"""ADMM-based interior point method for constrained VIs (exact and inexact).

Each inner iteration solves, in order,

    x_{k+1}:  x + (1/b) P_c F(x) - P_c y_k + (1/b) P_c lam_k - d_c = 0
    y_{k+1}:  argmin_y  -mu sum_i log(-phi_i(y)) + (b/2) ||y - x_{k+1} - lam_k / b||^2
    lam_{k+1} = lam_k + b (x_{k+1} - y_{k+1})

and the barrier weight decays geometrically across outer iterations.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import metrics
from .core import (
    CVIError,
    InfeasibleWarmStart,
    SingularSystem,
    SolverTrace,
    TraceRecord,
    as_vector,
)
from .linops import build_equality_projector, damped_newton_root

MU_FLOOR = 1e-300


# ---------------------------------------------------------------------------
# x-subproblem


def x_residual(field, proj, y_k, lambda_k, beta):
    """The map G whose root is the next x iterate."""
    shift = proj.apply(y_k - lambda_k / beta) + proj.d_c

    def G(x):
        return x + proj.apply(field(x)) / beta - shift

    return G


def x_residual_jacobian(field, proj, beta):
    n = field.dim
    if field.jacobian is None:
        raise ValueError("Newton x-solver needs the field Jacobian")
    return lambda x: np.eye(n) + proj.apply(field.jacobian(x)) / beta


@dataclass
class AffineXFactor:
    """LU factorization of ``I + (1/b) P_c A`` reused across iterations."""

    lu: tuple
    matrix: np.ndarray
    beta: float


def affine_x_factor(field, proj, beta):
    if field.affine is None:
        raise ValueError("affine_closed_form needs an affine field")
    A, _ = field.affine
    M = np.eye(field.dim) + proj.apply(A) / beta
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu = sla.lu_factor(M, check_finite=True)
    piv = np.abs(np.diag(lu[0]))
    if piv.min() <= 1e-13 * max(1.0, piv.max()):
        raise SingularSystem("I + P_c A / beta is singular; the operator is not monotone")
    return AffineXFactor(lu, M, beta)


def _resolve_x_mode(field, mode):
    if mode == "auto":
        return "affine_closed_form" if field.affine is not None else "newton"
    return mode


def solve_x_subproblem(
    field,
    proj,
    y_k,
    lambda_k,
    beta,
    mode="auto",
    tol=1e-10,
    x_warm=None,
    factor=None,
    inner=None,
    max_iters=100,
):
    """Return the root of the x-residual G (or l inner steps on it)."""
    mode = _resolve_x_mode(field, mode)
    G = x_residual(field, proj, y_k, lambda_k, beta)

    if mode == "affine_closed_form":
        if factor is None or factor.beta != beta:
            factor = affine_x_factor(field, proj, beta)
        _, b = field.affine
        rhs = proj.apply(y_k - (lambda_k + b) / beta) + proj.d_c
        x = sla.lu_solve(factor.lu, rhs)
        # iterative refinement to reach tol on badly scaled systems
        for _ in range(3):
            r = G(x)
            if np.max(np.abs(r), initial=0.0) <= tol:
                return x
            x = x - sla.lu_solve(factor.lu, r)
        if not np.all(np.isfinite(x)):
            raise SingularSystem("affine x-solve produced non-finite values")
        return x

    if mode == "newton":
        x0 = x_warm if x_warm is not None else proj.apply(y_k) + proj.d_c
        return damped_newton_root(
            G, x_residual_jacobian(field, proj, beta), x0, tol=tol, max_iters=max_iters
        )

    if mode == "inner_first_order":
        if inner is None:
            raise ValueError("inner_first_order needs an InnerOptimizer")
        x = np.array(x_warm if x_warm is not None else y_k, dtype=float, copy=True)
        eta = inner.eta_x
        for _ in range(inner.steps):
            if inner.optimizer == "gda":
                x = x - eta * G(x)
            else:
                x_half = x - eta * G(x)
                x = x - eta * G(x_half)
        return x

    raise ValueError(f"unknown x-solver mode {mode!r}")


# ---------------------------------------------------------------------------
# y-subproblem: barrier proximal step


def barrier_prox_objective(constraints, c, beta, mu):
    """Objective, gradient and Hessian of -mu sum log(-phi(y)) + b/2 ||y - c||^2."""

    def value(y):
        phi = constraints.phi(y)
        if np.any(phi >= 0):
            return np.inf
        return float(-mu * np.sum(np.log(-phi)) + 0.5 * beta * np.sum((y - c) ** 2))

    def grad(y):
        phi = constraints.phi(y)
        Jphi = constraints.phi_jacobian(y)
        return beta * (y - c) - mu * (Jphi.T @ (1.0 / phi))

    def hess(y):
        phi = constraints.phi(y)
        Jphi = constraints.phi_jacobian(y)
        H = beta * np.eye(y.shape[0])
        H += mu * (Jphi.T * (1.0 / phi**2)) @ Jphi
        H -= mu * constraints.phi_weighted_hessian(y, 1.0 / phi)
        return H

    return value, grad, hess


def _one_sided_prox(a, t):
    """Positive root z of z^2 - a z - t = 0, stable for either sign of a."""
    s = np.sqrt(a * a + 4 * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        neg = 2 * t / (s - a)
    return np.where(a >= 0, 0.5 * (a + s), neg)


def _box_prox(c, lower, upper, t, tol):
    """Per-coordinate minimizer of -t log(y-l) - t log(u-y) + (y-c)^2 / 2."""
    y = np.array(c, dtype=float, copy=True)
    lo_f, up_f = np.isfinite(lower), np.isfinite(upper)

    only_lo = lo_f & ~up_f
    y[only_lo] = lower[only_lo] + _one_sided_prox(c[only_lo] - lower[only_lo], t)
    only_up = up_f & ~lo_f
    y[only_up] = upper[only_up] - _one_sided_prox(upper[only_up] - c[only_up], t)

    both = np.flatnonzero(lo_f & up_f)
    if both.size:
        l, u, cc = lower[both], upper[both], c[both]
        a, b = l.copy(), u.copy()
        z = np.clip(cc, l + 0.25 * (u - l), u - 0.25 * (u - l))

        def g(z):
            return (z - cc) - t / (z - l) + t / (u - z)

        for _ in range(200):
            gz = g(z)
            a = np.where(gz < 0, z, a)
            b = np.where(gz > 0, z, b)
            if np.max(np.abs(gz)) <= tol:
                break
            dg = 1 + t / (z - l) ** 2 + t / (u - z) ** 2
            zn = z - gz / dg
            bad = ~((zn > a) & (zn < b))
            zn[bad] = 0.5 * (a[bad] + b[bad])
            if np.all(zn == z):
                break
            z = zn
        y[both] = z
    return y


def _ball_prox(c, center, radius, t, tol):
    """Minimizer of -t log(r^2 - ||y-o||^2) + ||y - c||^2 / 2 via its radial equation."""
    a = c - center
    s = float(np.linalg.norm(a))
    if s == 0.0:
        return center.copy()
    r = radius

    def h(rho):
        return rho + 2 * t * rho / ((r - rho) * (r + rho)) - s

    lo, hi = 0.0, min(s, r)
    rho = min(s, 0.5 * r)
    for _ in range(200):
        val = h(rho)
        if val < 0:
            lo = rho
        else:
            hi = rho
        if abs(val) <= tol or hi - lo <= 4e-16 * r:
            break
        q = (r - rho) * (r + rho)
        dh = 1 + 2 * t * (r * r + rho * rho) / (q * q)
        nxt = rho - val / dh
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        rho = nxt
    return center + a * (rho / s)


def _resolve_y_mode(constraints, mode):
    if mode == "auto":
        kind = constraints.structure.kind
        return "damped_newton" if kind == "general" else "structural_closed_form"
    return mode


def solve_y_subproblem(
    constraints,
    x_next,
    lambda_k,
    beta,
    mu,
    mode="auto",
    tol=1e-10,
    y_warm=None,
    max_iters=100,
):
    """Barrier proximal step; the result is strictly feasible."""
    c = x_next + lambda_k / beta
    if constraints.m == 0:
        return c
    mode = _resolve_y_mode(constraints, mode)
    t = mu / beta

    if mode == "structural_closed_form":
        tag = constraints.structure
        if tag.kind == "euclidean_ball":
            y = _ball_prox(c, tag.center, tag.radius, t, tol / beta)
        elif tag.kind in ("orthant", "box", "simplex", "shifted_simplex"):
            lo, up = tag.bounds(c.shape[0])
            y = _box_prox(c, lo, up, t, tol / beta)
        else:
            raise ValueError("no closed form for general constraints; use damped_newton")
        return y

    if mode == "damped_newton":
        if y_warm is None:
            raise InfeasibleWarmStart("damped_newton y-solver needs a warm start")
        if not constraints.strictly_feasible(y_warm):
            raise InfeasibleWarmStart("y warm start violates phi(y) < 0")
        _, grad, hess = barrier_prox_objective(constraints, c, beta, mu)
        return damped_newton_root(
            grad, hess, y_warm, tol=tol, max_iters=max_iters,
            feasibility_guard=constraints.strictly_feasible,
        )

    raise ValueError(f"unknown y-solver mode {mode!r}")


def barrier_gradient_descent(constraints, x_next, lambda_k, beta, mu, y, steps, eta):
    """``steps`` gradient steps on the barrier-prox objective, keeping phi(y) < 0."""
    c = x_next + lambda_k / beta
    value, grad, _ = barrier_prox_objective(constraints, c, beta, mu)
    fy = value(y)
    for _ in range(steps):
        g = grad(y)
        a = eta
        for _ in range(60):
            trial = y - a * g
            if constraints.strictly_feasible(trial):
                ft = value(trial)
                if ft <= fy:
                    y, fy = trial, ft
                    break
            a *= 0.5
    return y


def update_lambda(lambda_k, x_next, y_next, beta):
    return lambda_k + beta * (x_next - y_next)


# ---------------------------------------------------------------------------
# Drivers


def _initial_state(problem, config, barrier_on_y=True):
    n = problem.dim
    cons = problem.constraints
    y = as_vector(config.y_init if config.y_init is not None else problem.interior_point, n)
    lam = np.zeros(n) if config.lambda_init is None else as_vector(config.lambda_init, n)
    x = as_vector(config.x_init, n) if config.x_init is not None else y.copy()
    if not cons.strictly_feasible(y if barrier_on_y else x):
        side = "y" if barrier_on_y else "x"
        raise InfeasibleWarmStart(f"initial {side} must satisfy phi < 0")
    return x, y, lam


class _Budget:
    def __init__(self, max_updates=None, max_wall_time_s=None, callback=None):
        self.max_updates = max_updates
        self.max_wall_time_s = max_wall_time_s
        self.callback = callback
        self.start = time.perf_counter()
        self.updates = 0

    def elapsed(self):
        return time.perf_counter() - self.start

    def exhausted(self):
        if self.max_updates is not None and self.updates >= self.max_updates:
            return True
        if self.max_wall_time_s is not None and self.elapsed() >= self.max_wall_time_s:
            return True
        return False

    def stop_requested(self, record):
        return self.callback is not None and bool(self.callback(record))


def _run(problem, config, method, x_step, y_step, budget, barrier_on_y=True):
    """Shared outer/inner loop; ``barrier_on_y`` says which iterate must stay interior."""
    cons = problem.constraints
    beta = config.beta
    x, y, lam = _initial_state(problem, config, barrier_on_y)
    trace = SolverTrace(method, config_echo={"method": method, **config.echo()})
    trace.records.append(
        TraceRecord(0, 0, x.copy(), y.copy(), lam.copy(), 0.0, metrics.evaluate(problem, x, y))
    )
    if budget.stop_requested(trace.records[-1]):
        return trace
    mu = config.mu_init
    for t, K in enumerate(config.schedule()):
        mu = max(config.delta * mu, MU_FLOOR)
        for k in range(K):
            if budget.exhausted():
                return trace
            try:
                x = x_step(x, y, lam, mu)
                y_next = y_step(x, y, lam, mu)
            except CVIError as e:
                raise e.at(t, k)
            if not cons.strictly_feasible(y_next if barrier_on_y else x):
                raise InfeasibleWarmStart("iterate left the strict interior").at(t, k)
            lam_next = update_lambda(lam, x, y_next, beta)
            lemma = metrics.lemma_residual(lam, lam_next, y, y_next, beta)
            y, lam = y_next, lam_next
            budget.updates += 1
            rec = TraceRecord(
                t, k + 1, x.copy(), y.copy(), lam.copy(), budget.elapsed(),
                metrics.evaluate(problem, x, y, lemma),
            )
            rec.metrics["mu"] = mu
            trace.records.append(rec)
            if budget.stop_requested(rec):
                return trace
    return trace


def acvi_run(problem, config, callback=None, max_updates=None, max_wall_time_s=None):
    """Run ACVI with exact subproblem solves; returns the full trace."""
    field = problem.field
    cons = problem.constraints
    proj = build_equality_projector(cons.C, cons.d)
    beta, tol = config.beta, config.tol_subproblem
    x_mode = _resolve_x_mode(field, config.x_solver)
    if x_mode == "inner_first_order":
        raise ValueError("use acvi_inexact_run for inner_first_order")
    factor = affine_x_factor(field, proj, beta) if x_mode == "affine_closed_form" else None
    y_mode = _resolve_y_mode(cons, config.y_solver)

    def x_step(x, y, lam, mu):
        return solve_x_subproblem(
            field, proj, y, lam, beta, mode=x_mode, tol=tol, x_warm=x,
            factor=factor, max_iters=config.max_newton_iters,
        )

    def y_step(x_next, y, lam, mu):
        return solve_y_subproblem(
            cons, x_next, lam, beta, mu, mode=y_mode, tol=tol, y_warm=y,
            max_iters=config.max_newton_iters,
        )

    budget = _Budget(max_updates, max_wall_time_s, callback)
    return _run(problem, config, "acvi", x_step, y_step, budget)


def acvi_inexact_run(problem, config, callback=None, max_updates=None, max_wall_time_s=None):
    """ACVI where both subproblems take ``l`` warm-started first-order steps."""
    if config.inner is None:
        raise ValueError("inexact ACVI needs config.inner")
    field = problem.field
    cons = problem.constraints
    proj = build_equality_projector(cons.C, cons.d)
    beta, inner = config.beta, config.inner

    def x_step(x, y, lam, mu):
        return solve_x_subproblem(
            field, proj, y, lam, beta, mode="inner_first_order", x_warm=x, inner=inner
        )

    def y_step(x_next, y, lam, mu):
        return barrier_gradient_descent(
            cons, x_next, lam, beta, mu, y, inner.steps, inner.eta_y
        )

    budget = _Budget(max_updates, max_wall_time_s, callback)
    return _run(problem, config, "acvi_inexact", x_step, y_step, budget)

