"""v-ACVI: the barrier sits in the x-subproblem, the equality projection in y.

Per inner iteration x solves

    x - y_k + (1/b)(F(x) + lam_k) - (mu/b) sum_i grad phi_i(x) / phi_i(x) = 0

inside phi(x) < 0, then ``y = P_c (x + lam_k / b) + d_c`` and lam is updated
as in ACVI.
"""
import dataclasses

import numpy as np

from .acvi import _Budget, _run
from .core import InfeasibleWarmStart
from .linops import affine_project, build_equality_projector, damped_newton_root


def barrier_x_residual(field, constraints, y_k, lambda_k, beta, mu):
    def residual(x):
        r = x - y_k + (field(x) + lambda_k) / beta
        if constraints.m:
            phi = constraints.phi(x)
            r = r - (mu / beta) * (constraints.phi_jacobian(x).T @ (1.0 / phi))
        return r

    def jacobian(x):
        J = np.eye(x.shape[0]) + field.jacobian(x) / beta
        if constraints.m:
            phi = constraints.phi(x)
            Jphi = constraints.phi_jacobian(x)
            J += (mu / beta) * (Jphi.T * (1.0 / phi**2)) @ Jphi
            J -= (mu / beta) * constraints.phi_weighted_hessian(x, 1.0 / phi)
        return J

    return residual, jacobian


def solve_x_barrier(
    field, y_k, lambda_k, beta, mu, constraints, warm, tol=1e-10, max_iters=100
):
    """Strictly feasible root of the barrier x-equation, by guarded damped Newton."""
    if field.jacobian is None:
        raise ValueError("v-ACVI needs the field Jacobian")
    warm = np.asarray(warm, dtype=float)
    if constraints.m and not constraints.strictly_feasible(warm):
        raise InfeasibleWarmStart("v-ACVI x warm start violates phi(x) < 0")
    residual, jacobian = barrier_x_residual(field, constraints, y_k, lambda_k, beta, mu)
    guard = constraints.strictly_feasible if constraints.m else None
    return damped_newton_root(
        residual, jacobian, warm, tol=tol, max_iters=max_iters, feasibility_guard=guard
    )


def vacvi_run(problem, config, callback=None, max_updates=None, max_wall_time_s=None):
    field = problem.field
    cons = problem.constraints
    proj = build_equality_projector(cons.C, cons.d)
    beta, tol = config.beta, config.tol_subproblem
    if config.x_init is None:
        start = config.y_init if config.y_init is not None else problem.interior_point
        config = dataclasses.replace(config, x_init=np.asarray(start, dtype=float))

    def x_step(x, y, lam, mu):
        return solve_x_barrier(
            field, y, lam, beta, mu, cons, x, tol=tol, max_iters=config.max_newton_iters
        )

    def y_step(x_next, y, lam, mu):
        return affine_project(proj, x_next + lam / beta)

    budget = _Budget(max_updates, max_wall_time_s, callback)
    return _run(problem, config, "vacvi", x_step, y_step, budget, barrier_on_y=False)
