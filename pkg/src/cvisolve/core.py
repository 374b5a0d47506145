"""Domain types shared by the solvers, the benchmark problems and the harness."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


class CVIError(Exception):
    """Base class for solver errors. ``t``/``k`` locate the failing iteration."""

    t: Optional[int] = None
    k: Optional[int] = None

    def at(self, t, k):
        self.t, self.k = t, k
        return self

    def __str__(self):
        msg = super().__str__()
        if self.t is not None:
            msg = f"{msg} (outer t={self.t}, inner k={self.k})"
        return msg


class RankDeficient(CVIError):
    pass


class MaxIterationsExceeded(CVIError):
    pass


class SingularJacobian(CVIError):
    pass


class SingularSystem(CVIError):
    pass


class InfeasibleWarmStart(CVIError):
    pass


class NonTerminating(CVIError):
    pass


class MissingLMO(CVIError):
    pass


class ZeroReference(CVIError):
    pass


def as_vector(x, n=None):
    x = np.asarray(x, dtype=float).reshape(-1)
    if n is not None and x.shape[0] != n:
        raise ValueError(f"expected a vector of length {n}, got {x.shape[0]}")
    return x


# ---------------------------------------------------------------------------
# Operators


@dataclass(frozen=True)
class VectorField:
    """The operator F of a variational inequality.

    ``affine`` is set when F(x) = A x + b; solvers use it for closed-form
    subproblems.
    """

    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    lipschitz_hint: Optional[float] = None
    affine: Optional[tuple] = None

    def __call__(self, x):
        return self.eval(x)

    @classmethod
    def from_affine(cls, A, b=None, lipschitz_hint=None):
        A = np.array(A, dtype=float)
        n = A.shape[0]
        b = np.zeros(n) if b is None else as_vector(b, n).copy()
        A.setflags(write=False)
        b.setflags(write=False)
        if lipschitz_hint is None:
            lipschitz_hint = float(np.linalg.norm(A, 2))
        return cls(
            dim=n,
            eval=lambda x: A @ x + b,
            jacobian=lambda x: A,
            lipschitz_hint=lipschitz_hint,
            affine=(A, b),
        )


# ---------------------------------------------------------------------------
# Inequality constraints phi_i(x) <= 0, stored in vectorized blocks.


class InequalityBlock:
    """A block of ``size`` smooth convex scalar constraints phi_i(x) <= 0."""

    size: int

    def value(self, x):
        raise NotImplementedError

    def jacobian(self, x):
        raise NotImplementedError

    def weighted_hessian(self, x, w):
        """Return sum_i w_i * Hess phi_i(x)."""
        raise NotImplementedError


class LinearInequalities(InequalityBlock):
    """phi(x) = A x - b."""

    def __init__(self, A, b):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = as_vector(b, self.A.shape[0])
        self.size = self.A.shape[0]

    def value(self, x):
        return self.A @ x - self.b

    def jacobian(self, x):
        return self.A

    def weighted_hessian(self, x, w):
        n = self.A.shape[1]
        return np.zeros((n, n))


class BallInequality(InequalityBlock):
    """phi(x) = ||x - center||^2 - radius^2."""

    size = 1

    def __init__(self, center, radius):
        self.center = as_vector(center)
        self.radius = float(radius)

    def value(self, x):
        d = x - self.center
        return np.array([d @ d - self.radius**2])

    def jacobian(self, x):
        return 2.0 * (x - self.center)[None, :]

    def weighted_hessian(self, x, w):
        return 2.0 * float(w[0]) * np.eye(x.shape[0])


class ScalarInequality(InequalityBlock):
    """A single generic constraint given by callables.

    Without ``hessian`` the Hessian is approximated by central differences of
    the gradient.
    """

    size = 1

    def __init__(self, value, gradient, hessian=None):
        self._value = value
        self._gradient = gradient
        self._hessian = hessian

    def value(self, x):
        return np.array([float(self._value(x))])

    def jacobian(self, x):
        return np.asarray(self._gradient(x), dtype=float)[None, :]

    def weighted_hessian(self, x, w):
        if self._hessian is not None:
            return float(w[0]) * np.asarray(self._hessian(x), dtype=float)
        n = x.shape[0]
        H = np.empty((n, n))
        h = 1e-6
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            H[:, j] = (self._gradient(x + e) - self._gradient(x - e)) / (2 * h)
        return float(w[0]) * 0.5 * (H + H.T)


def bound_inequalities(lower, upper):
    """Linear rows for the finite entries of ``lower <= x <= upper``."""
    lower, upper = as_vector(lower), as_vector(upper)
    n = lower.shape[0]
    rows, rhs = [], []
    for j in np.flatnonzero(np.isfinite(lower)):
        r = np.zeros(n)
        r[j] = -1.0
        rows.append(r)
        rhs.append(-lower[j])
    for j in np.flatnonzero(np.isfinite(upper)):
        r = np.zeros(n)
        r[j] = 1.0
        rows.append(r)
        rhs.append(upper[j])
    if not rows:
        return None
    return LinearInequalities(np.array(rows), np.array(rhs))


# ---------------------------------------------------------------------------
# Constraint sets


STRUCTURE_KINDS = ("orthant", "box", "euclidean_ball", "simplex", "shifted_simplex", "general")


@dataclass(frozen=True)
class StructureTag:
    """Shape of the constraint set, used for closed forms and projections.

    ``blocks`` lists the block sizes of (shifted) simplex products.
    """

    kind: str = "general"
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    radius: Optional[float] = None
    blocks: tuple = ()

    def __post_init__(self):
        if self.kind not in STRUCTURE_KINDS:
            raise ValueError(f"unknown structure kind {self.kind!r}")

    def bounds(self, n):
        """Coordinate bounds implied by the inequalities of a box-like tag."""
        if self.kind == "orthant" or self.kind == "simplex":
            return np.zeros(n), np.full(n, np.inf)
        if self.kind == "shifted_simplex":
            return -np.ones(n), np.full(n, np.inf)
        if self.kind == "box":
            return self.lower, self.upper
        raise ValueError(f"{self.kind} constraints have no coordinate bounds")

    def contains(self, x, tol=0.0):
        """Membership in the tagged set (inequalities and, for simplices, sums)."""
        n = x.shape[0]
        if self.kind == "general":
            raise ValueError("general sets have no structural membership rule")
        if self.kind == "euclidean_ball":
            return bool(np.linalg.norm(x - self.center) <= self.radius + tol)
        lo, hi = self.bounds(n)
        ok = bool(np.all(x >= lo - tol) and np.all(x <= hi + tol))
        if self.kind in ("simplex", "shifted_simplex"):
            target = 1.0 if self.kind == "simplex" else 0.0
            for sl in block_slices(self.blocks):
                ok = ok and abs(x[sl].sum() - target) <= tol + 1e-9
        return ok


def block_slices(blocks):
    out, start = [], 0
    for b in blocks:
        out.append(slice(start, start + b))
        start += b
    return out


@dataclass(frozen=True)
class ConstraintSpec:
    """Linear equalities ``C x = d`` plus inequalities ``phi_i(x) <= 0``."""

    C: np.ndarray
    d: np.ndarray
    inequalities: tuple = ()
    structure: StructureTag = field(default_factory=StructureTag)

    @property
    def n(self):
        return self.C.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    @property
    def m(self):
        return sum(b.size for b in self.inequalities)

    def phi(self, x):
        if not self.inequalities:
            return np.zeros(0)
        return np.concatenate([b.value(x) for b in self.inequalities])

    def phi_jacobian(self, x):
        if not self.inequalities:
            return np.zeros((0, x.shape[0]))
        return np.vstack([b.jacobian(x) for b in self.inequalities])

    def phi_weighted_hessian(self, x, w):
        H = np.zeros((x.shape[0], x.shape[0]))
        i = 0
        for b in self.inequalities:
            H += b.weighted_hessian(x, w[i : i + b.size])
            i += b.size
        return H

    def scalar_inequalities(self):
        """The inequalities as an ordered list of (value, gradient) callables."""
        out = []
        for blk in self.inequalities:
            for i in range(blk.size):
                out.append(
                    (
                        lambda x, blk=blk, i=i: float(blk.value(x)[i]),
                        lambda x, blk=blk, i=i: np.asarray(blk.jacobian(x))[i],
                    )
                )
        return out

    def strictly_feasible(self, x):
        return bool(np.all(self.phi(x) < 0))

    def equality_residual(self, x):
        if self.p == 0:
            return 0.0
        return float(np.max(np.abs(self.C @ x - self.d)))

    def contains(self, x, tol=1e-10):
        return bool(np.all(self.phi(x) <= tol)) and self.equality_residual(x) <= tol


def _no_equalities(n):
    return np.zeros((0, n)), np.zeros(0)


def orthant_constraints(n):
    C, d = _no_equalities(n)
    return ConstraintSpec(
        C, d, (LinearInequalities(-np.eye(n), np.zeros(n)),), StructureTag("orthant")
    )


def box_constraints(lower, upper, C=None, d=None):
    lower, upper = as_vector(lower), as_vector(upper)
    n = lower.shape[0]
    if C is None:
        C, d = _no_equalities(n)
    blk = bound_inequalities(lower, upper)
    return ConstraintSpec(
        np.atleast_2d(np.asarray(C, dtype=float)).reshape(-1, n),
        as_vector(d),
        (blk,) if blk is not None else (),
        StructureTag("box", lower=lower, upper=upper),
    )


def ball_constraints(center, radius):
    center = as_vector(center)
    C, d = _no_equalities(center.shape[0])
    return ConstraintSpec(
        C,
        d,
        (BallInequality(center, radius),),
        StructureTag("euclidean_ball", center=center, radius=float(radius)),
    )


def _block_sum_rows(blocks):
    n = sum(blocks)
    C = np.zeros((len(blocks), n))
    for i, sl in enumerate(block_slices(blocks)):
        C[i, sl] = 1.0
    return C


def simplex_constraints(blocks):
    """Product of probability simplices with the given block sizes."""
    blocks = tuple(int(b) for b in blocks)
    n = sum(blocks)
    return ConstraintSpec(
        _block_sum_rows(blocks),
        np.ones(len(blocks)),
        (LinearInequalities(-np.eye(n), np.zeros(n)),),
        StructureTag("simplex", blocks=blocks),
    )


def shifted_simplex_constraints(blocks):
    """Product of sets {x >= -e, e^T x = 0}."""
    blocks = tuple(int(b) for b in blocks)
    n = sum(blocks)
    return ConstraintSpec(
        _block_sum_rows(blocks),
        np.zeros(len(blocks)),
        (LinearInequalities(-np.eye(n), np.ones(n)),),
        StructureTag("shifted_simplex", blocks=blocks),
    )


# ---------------------------------------------------------------------------
# Problems, solver configuration and traces


@dataclass(frozen=True)
class ProblemInstance:
    name: str
    field: VectorField
    constraints: ConstraintSpec
    interior_point: np.ndarray
    known_solution: Optional[np.ndarray] = None
    lmo: Optional[Callable[[np.ndarray], np.ndarray]] = None
    params: dict = dataclasses.field(default_factory=dict)
    monotone: bool = True

    @property
    def dim(self):
        return self.field.dim


INTERIOR_EQ_TOL = 1e-10


def validate_problem(p):
    """Return a list of violated invariants of ``p`` (empty when valid)."""
    report = []
    n = p.field.dim
    cons = p.constraints
    if cons.n != n:
        report.append(f"constraint dimension {cons.n} != field dimension {n}")
        return report
    x0 = np.asarray(p.interior_point, dtype=float)
    if x0.shape != (n,):
        report.append("interior_point has wrong shape")
    else:
        fx = np.asarray(p.field(x0))
        if fx.shape != (n,):
            report.append(f"field returned shape {fx.shape}, expected ({n},)")
        phi = cons.phi(x0)
        for i in np.flatnonzero(phi >= 0):
            report.append(f"inequality {i + 1} not strict at interior_point")
        if cons.equality_residual(x0) > INTERIOR_EQ_TOL:
            report.append("interior_point violates equalities")
    if p.known_solution is not None:
        xs = np.asarray(p.known_solution, dtype=float)
        if xs.shape != (n,):
            report.append("known_solution has wrong shape")
        else:
            if np.any(cons.phi(xs) > INTERIOR_EQ_TOL):
                report.append("known_solution violates inequalities")
            if cons.equality_residual(xs) > INTERIOR_EQ_TOL:
                report.append("known_solution violates equalities")
    if cons.p:
        s = np.linalg.svd(cons.C, compute_uv=False)
        if s.min() <= 1e-12 * max(1.0, s.max()):
            report.append("equality matrix C is rank deficient")
    return report


X_SOLVERS = ("auto", "affine_closed_form", "newton", "inner_first_order")
Y_SOLVERS = ("auto", "structural_closed_form", "damped_newton")


@dataclass(frozen=True)
class InnerOptimizer:
    """Unconstrained inner solver used by inexact ACVI.

    ``steps`` is the number l of steps per subproblem.
    """

    optimizer: str = "gda"
    steps: int = 1
    eta_x: float = 0.1
    eta_y: float = 0.1

    def __post_init__(self):
        if self.optimizer not in ("gda", "eg"):
            raise ValueError(f"unknown inner optimizer {self.optimizer!r}")
        if self.steps < 1 or self.eta_x <= 0 or self.eta_y <= 0:
            raise ValueError("inner optimizer needs steps >= 1 and positive step sizes")


@dataclass(frozen=True)
class AcviConfig:
    """Hyperparameters for ACVI and its variants.

    ``inner_iters`` is either a constant K or one K per outer iteration.
    """

    beta: float = 0.5
    mu_init: float = 1e-6
    delta: float = 0.5
    outer_iters: int = 1
    inner_iters: object = 50
    x_solver: str = "auto"
    y_solver: str = "auto"
    inner: Optional[InnerOptimizer] = None
    tol_subproblem: float = 1e-10
    max_newton_iters: int = 100
    lambda_init: Optional[np.ndarray] = None
    y_init: Optional[np.ndarray] = None
    x_init: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not self.mu_init > 0:
            raise ValueError("mu_init must be positive")
        if not self.tol_subproblem > 0:
            raise ValueError("tol_subproblem must be positive")
        if self.x_solver not in X_SOLVERS:
            raise ValueError(f"unknown x_solver {self.x_solver!r}")
        if self.y_solver not in Y_SOLVERS:
            raise ValueError(f"unknown y_solver {self.y_solver!r}")
        if self.x_solver == "inner_first_order" and self.inner is None:
            raise ValueError("inner_first_order needs an InnerOptimizer")
        sched = self.schedule()
        if any(k < 0 for k in sched):
            raise ValueError("inner iteration counts must be non-negative")

    def schedule(self):
        if isinstance(self.inner_iters, (int, np.integer)):
            return [int(self.inner_iters)] * int(self.outer_iters)
        sched = [int(k) for k in self.inner_iters]
        return sched

    @classmethod
    def from_runs(cls, runs: Sequence, **kwargs):
        """Build from run-length pairs, e.g. ``[(19, 1), (1, 30)]``."""
        sched = [int(k) for count, k in runs for _ in range(int(count))]
        return cls(outer_iters=len(sched), inner_iters=tuple(sched), **kwargs)

    def echo(self):
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                v = v.tolist()
            elif isinstance(v, InnerOptimizer):
                v = dataclasses.asdict(v)
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


@dataclass
class TraceRecord:
    t: int
    k: int
    x: np.ndarray
    y: Optional[np.ndarray]
    lam: Optional[np.ndarray]
    wall_time_s: float
    metrics: dict


@dataclass
class SolverTrace:
    method: str
    records: list = field(default_factory=list)
    config_echo: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def metric(self, name):
        return np.array(
            [np.nan if r.metrics.get(name) is None else r.metrics[name] for r in self.records]
        )

    @property
    def final(self):
        return self.records[-1]

    def xs(self):
        return np.array([r.x for r in self.records])
