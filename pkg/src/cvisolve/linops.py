"""Dense linear algebra: the equality projector and a damped Newton root finder."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .core import InfeasibleWarmStart, MaxIterationsExceeded, RankDeficient, SingularJacobian

# Above this dimension P_c is applied implicitly through the Cholesky factor.
DENSE_PROJECTOR_MAX_N = 2000


@dataclass(frozen=True)
class EqualityProjector:
    """Affine projection ``v -> P_c v + d_c`` onto ``{x : C x = d}``."""

    P_c: Optional[np.ndarray]
    d_c: np.ndarray
    chol_CCt: Optional[tuple]
    C: np.ndarray
    has_equalities: bool

    @property
    def n(self):
        return self.d_c.shape[0]

    @property
    def dense(self):
        return self.P_c is not None

    def apply(self, v):
        """P_c @ v for a vector or a matrix of columns."""
        if not self.has_equalities:
            return np.array(v, dtype=float, copy=True)
        if self.P_c is not None:
            return self.P_c @ v
        return v - self.C.T @ sla.cho_solve(self.chol_CCt, self.C @ v)

    def matrix(self):
        if self.P_c is not None:
            return self.P_c
        return self.apply(np.eye(self.n))


def build_equality_projector(C, d, dense=None):
    """Precompute ``P_c = I - C^T (C C^T)^{-1} C`` and ``d_c = C^T (C C^T)^{-1} d``.

    Raises RankDeficient when ``C C^T`` is not numerically positive definite.
    """
    C = np.asarray(C, dtype=float)
    n = C.shape[1]
    d = np.asarray(d, dtype=float).reshape(-1)
    p = C.shape[0]
    if d.shape[0] != p:
        raise ValueError(f"d has length {d.shape[0]}, C has {p} rows")
    if p > n:
        raise RankDeficient(f"{p} equalities in dimension {n}")
    if dense is None:
        dense = n <= DENSE_PROJECTOR_MAX_N
    if p == 0:
        return EqualityProjector(np.eye(n) if dense else None, np.zeros(n), None, C, False)

    CCt = C @ C.T
    try:
        chol = sla.cho_factor(CCt, lower=True)
    except np.linalg.LinAlgError as e:
        raise RankDeficient(f"C C^T is not positive definite: {e}") from None
    diag = np.abs(np.diag(chol[0]))
    if diag.min() <= 1e-7 * diag.max():
        raise RankDeficient("C C^T is numerically singular (rank(C) < p)")

    d_c = C.T @ sla.cho_solve(chol, d)
    P = None
    if dense:
        P = np.eye(n) - C.T @ sla.cho_solve(chol, C)
        P = 0.5 * (P + P.T)
    return EqualityProjector(P, d_c, chol, C, True)


def affine_project(proj, v):
    """Euclidean projection of ``v`` onto the affine set ``C x = d``."""
    return proj.apply(np.asarray(v, dtype=float)) + proj.d_c


def damped_newton_root(
    residual,
    jac,
    x0,
    tol=1e-10,
    max_iters=100,
    feasibility_guard=None,
):
    """Solve ``residual(x) = 0`` by Newton's method with backtracking.

    The step is halved until the trial point satisfies ``feasibility_guard``
    and the residual 2-norm decreases (Armijo factor 1e-4); the residual is
    never evaluated at a point rejected by the guard.
    """
    x = np.array(x0, dtype=float, copy=True)
    if feasibility_guard is not None and not feasibility_guard(x):
        raise InfeasibleWarmStart("Newton start point violates the feasibility guard")
    r = residual(x)
    for _ in range(max_iters + 1):
        if np.max(np.abs(r), initial=0.0) <= tol:
            return x
        J = jac(x)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise SingularJacobian("singular Jacobian in Newton step") from None
        if not np.all(np.isfinite(step)):
            raise SingularJacobian("non-finite Newton step")
        nr = np.linalg.norm(r)
        a = 1.0
        while True:
            trial = x + a * step
            if feasibility_guard is None or feasibility_guard(trial):
                rt = residual(trial)
                if np.all(np.isfinite(rt)) and np.linalg.norm(rt) <= (1 - 1e-4 * a) * nr:
                    break
            a *= 0.5
            if a < 2.0**-30:
                raise MaxIterationsExceeded(
                    f"Newton line search stagnated at residual {np.max(np.abs(r)):.3e}"
                )
        x, r = trial, rt
    raise MaxIterationsExceeded(
        f"Newton did not reach tol={tol:g} in {max_iters} iterations "
        f"(residual {np.max(np.abs(r)):.3e})"
    )
