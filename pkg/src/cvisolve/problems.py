"""Benchmark problem constructors.

Random instances draw from ``numpy.random.default_rng(seed)``, i.e. the PCG64
bit generator seeded through SeedSequence; the order of draws is documented
per constructor so fixtures can be regenerated elsewhere.
"""
from __future__ import annotations

import numpy as np

from .core import (
    ProblemInstance,
    VectorField,
    ball_constraints,
    block_slices,
    box_constraints,
    orthant_constraints,
    shifted_simplex_constraints,
    simplex_constraints,
)

# ---------------------------------------------------------------------------
# Linear minimization oracles


def simplex_lmo(blocks):
    slices = block_slices(blocks)

    def lmo(r):
        s = np.zeros_like(r, dtype=float)
        for sl in slices:
            s[sl.start + int(np.argmin(r[sl]))] = 1.0
        return s

    return lmo


def shifted_simplex_lmo(blocks):
    """Vertices of {x >= -e, e^T x = 0}: one coordinate at size-1, the rest at -1."""
    slices = block_slices(blocks)

    def lmo(r):
        s = -np.ones_like(r, dtype=float)
        for sl in slices:
            s[sl.start + int(np.argmin(r[sl]))] = sl.stop - sl.start - 1.0
        return s

    return lmo


def ball_lmo(center, radius):
    center = np.asarray(center, dtype=float)

    def lmo(r):
        nr = np.linalg.norm(r)
        if nr == 0:
            return center.copy()
        return center - radius * r / nr

    return lmo


# ---------------------------------------------------------------------------
# 2-D games


def make_cbg():
    """Constrained bilinear game 0.05 x1^2 + x1 x2 - 0.05 x2^2 on x >= 0."""
    A = np.array([[0.1, 1.0], [-1.0, 0.1]])
    return ProblemInstance(
        name="cbg",
        field=VectorField.from_affine(A),
        constraints=orthant_constraints(2),
        interior_point=np.array([1.0, 1.0]),
        known_solution=np.zeros(2),
    )


RATIO_R = np.array([[-0.6, -0.3], [0.6, -0.3]])
RATIO_S = np.array([[0.9, 0.5], [0.8, 0.4]])
# interior stationary point of V on the simplex product, solved in closed form
_SQRT17 = np.sqrt(17.0)
RATIO_SOLUTION_P = (5 * _SQRT17 - 13) / 8
RATIO_SOLUTION_Q = (5 * _SQRT17 - 19) / 32


def make_ratio_game():
    """Von Neumann ratio game <x, R y> / <x, S y> over two 2-simplices."""
    R, S = RATIO_R, RATIO_S

    def split(z):
        return z[:2], z[2:]

    def grads(x, y):
        r, s = x @ R @ y, x @ S @ y
        gx = (R @ y) / s - r * (S @ y) / s**2
        gy = (R.T @ x) / s - r * (S.T @ x) / s**2
        return gx, gy

    def F(z):
        gx, gy = grads(*split(z))
        return np.concatenate([gx, -gy])

    def jac(z):
        x, y = split(z)
        r, s = x @ R @ y, x @ S @ y
        gr = np.concatenate([R @ y, R.T @ x])
        gs = np.concatenate([S @ y, S.T @ x])
        Hr = np.block([[np.zeros((2, 2)), R], [R.T, np.zeros((2, 2))]])
        Hs = np.block([[np.zeros((2, 2)), S], [S.T, np.zeros((2, 2))]])
        H = (
            Hr / s
            - (np.outer(gr, gs) + np.outer(gs, gr)) / s**2
            - r * Hs / s**2
            + 2 * r * np.outer(gs, gs) / s**3
        )
        H[2:] *= -1
        return H

    p, q = RATIO_SOLUTION_P, RATIO_SOLUTION_Q
    return ProblemInstance(
        name="ratio_game",
        field=VectorField(4, F, jac),
        constraints=simplex_constraints((2, 2)),
        interior_point=np.full(4, 0.5),
        known_solution=np.array([p, 1 - p, q, 1 - q]),
        lmo=simplex_lmo((2, 2)),
        monotone=False,
    )


def forsaken_h_prime(z):
    return z / 2 - 2 * z**3 + z**5


def forsaken_h_second(z):
    return 0.5 - 6 * z**2 + 5 * z**4


FORSAKEN_CONSTRAINTS = ("ball4", "x1_min", "x2_min")


def make_forsaken(constraint="ball4"):
    """Forsaken game x1 (x2 - 0.45) + h(x1) - h(x2), h(z) = z^2/4 - z^4/2 + z^6/6."""

    def F(x):
        return np.array(
            [x[1] - 0.45 + forsaken_h_prime(x[0]), -x[0] + forsaken_h_prime(x[1])]
        )

    def jac(x):
        return np.array(
            [[forsaken_h_second(x[0]), 1.0], [-1.0, forsaken_h_second(x[1])]]
        )

    lmo = None
    if constraint == "ball4":
        cons = ball_constraints(np.zeros(2), 2.0)
        lmo = ball_lmo(np.zeros(2), 2.0)
    elif constraint == "x1_min":
        cons = box_constraints([0.08, -np.inf], [np.inf, np.inf])
    elif constraint == "x2_min":
        cons = box_constraints([-np.inf, 0.4], [np.inf, np.inf])
    else:
        raise ValueError(f"unknown Forsaken constraint {constraint!r}")
    return ProblemInstance(
        name="forsaken",
        field=VectorField(2, F, jac),
        constraints=cons,
        interior_point=np.array([0.5, 0.5]),
        lmo=lmo,
        params={"constraint": constraint},
        monotone=False,
    )


def make_toy_gan(num_samples=1000, seed=0, x_sq_mean=None, z_sq_mean=None):
    """Toy GAN  phi E[x^2] - phi theta^2 E[z^2]  on theta^2 + phi^2 <= 4, variables (theta, phi).

    Draws ``num_samples`` of x ~ N(0, 2) (variance 2) then ``num_samples`` of
    z ~ N(0, 1), once. ``x_sq_mean``/``z_sq_mean`` override the sample moments.
    """
    rng = np.random.default_rng(seed)
    xs = rng.normal(0.0, np.sqrt(2.0), num_samples)
    zs = rng.normal(0.0, 1.0, num_samples)
    mx = float(np.mean(xs**2)) if x_sq_mean is None else float(x_sq_mean)
    mz = float(np.mean(zs**2)) if z_sq_mean is None else float(z_sq_mean)

    def F(v):
        theta, phi = v
        return np.array([-2 * phi * theta * mz, -(mx - theta**2 * mz)])

    def jac(v):
        theta, phi = v
        return np.array([[-2 * phi * mz, -2 * theta * mz], [2 * theta * mz, 0.0]])

    params = {"num_samples": num_samples, "seed": seed}
    if x_sq_mean is not None:
        params["x_sq_mean"] = x_sq_mean
    if z_sq_mean is not None:
        params["z_sq_mean"] = z_sq_mean
    return ProblemInstance(
        name="toy_gan",
        field=VectorField(2, F, jac),
        constraints=ball_constraints(np.zeros(2), 2.0),
        interior_point=np.zeros(2),
        lmo=ball_lmo(np.zeros(2), 2.0),
        params=params,
        monotone=False,
    )


# ---------------------------------------------------------------------------
# High-dimensional bilinear games


def _game_matrix(eta, A, B, C):
    """Operator matrix of eta/2 x1'A x1 + (1-eta) x1'B x2 - eta/2 x2'C x2."""
    return np.block([[eta * A, (1 - eta) * B], [-(1 - eta) * B.T, eta * C]])


def make_hbg(eta=0.5, n=1000, seed=0):
    """eta x1'x1 + (1 - eta) x1'x2 - eta x2'x2 on a product of two (n/2)-simplices.

    The start point draws u ~ U(0.5, 1.5)^n once and normalizes each half.
    """
    if n % 2 or n < 2:
        raise ValueError("n must be a positive even integer")
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    h = n // 2
    I = np.eye(h)
    M = _game_matrix(eta, 2 * I, I, 2 * I)
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.5, 1.5, n)
    u[:h] /= u[:h].sum()
    u[h:] /= u[h:].sum()
    return ProblemInstance(
        name="hbg",
        field=VectorField.from_affine(M),
        constraints=simplex_constraints((h, h)),
        interior_point=u,
        known_solution=np.full(n, 1.0 / h),
        lmo=simplex_lmo((h, h)),
        params={"eta": eta, "n": n, "seed": seed},
    )


def random_game_matrices(h, seed):
    """A, C = M'M / ||M'M||_2 and B / ||B||_2 from standard normals.

    Draw order: M_A (h x h), B (h x h), M_C (h x h).
    """
    rng = np.random.default_rng(seed)
    MA = rng.standard_normal((h, h))
    B = rng.standard_normal((h, h))
    MC = rng.standard_normal((h, h))
    A = MA.T @ MA
    C = MC.T @ MC
    A /= np.linalg.norm(A, 2)
    C /= np.linalg.norm(C, 2)
    B /= np.linalg.norm(B, 2)
    return rng, A, B, C


def make_ghbg(eta=0.5, n_per_player=500, seed=0):
    """General HBG on the shifted simplex {x_i >= -e, e'x_i = 0}; solution 0."""
    h = n_per_player
    rng, A, B, C = random_game_matrices(h, seed)
    u = rng.uniform(-0.5, 0.5, 2 * h)
    u[:h] -= u[:h].mean()
    u[h:] -= u[h:].mean()
    return ProblemInstance(
        name="ghbg",
        field=VectorField.from_affine(_game_matrix(eta, A, B, C)),
        constraints=shifted_simplex_constraints((h, h)),
        interior_point=u,
        known_solution=np.zeros(2 * h),
        lmo=shifted_simplex_lmo((h, h)),
        params={"eta": eta, "n_per_player": n_per_player, "seed": seed},
    )


def make_gghbg(eta=0.5, n_per_player=500, seed=0, n_eq=10):
    """General HBG on {-100 e <= x_i <= 100 e, C_i x_i = 0}; solution 0, no LMO.

    After the game matrices, draws C_1, C_2 (n_eq x h each) and a start
    direction, which is projected onto the null space and scaled to max-norm 1.
    """
    h = n_per_player
    rng, A, B, C = random_game_matrices(h, seed)
    C1 = rng.standard_normal((n_eq, h))
    C2 = rng.standard_normal((n_eq, h))
    Ceq = np.zeros((2 * n_eq, 2 * h))
    Ceq[:n_eq, :h] = C1
    Ceq[n_eq:, h:] = C2
    v = rng.standard_normal(2 * h)
    v -= Ceq.T @ np.linalg.solve(Ceq @ Ceq.T, Ceq @ v)
    v /= np.max(np.abs(v))
    bound = np.full(2 * h, 100.0)
    return ProblemInstance(
        name="gghbg",
        field=VectorField.from_affine(_game_matrix(eta, A, B, C)),
        constraints=box_constraints(-bound, bound, Ceq, np.zeros(2 * n_eq)),
        interior_point=v,
        known_solution=np.zeros(2 * h),
        params={"eta": eta, "n_per_player": n_per_player, "seed": seed, "n_eq": n_eq},
    )


PROBLEMS = {
    "cbg": make_cbg,
    "ratio_game": make_ratio_game,
    "forsaken": make_forsaken,
    "toy_gan": make_toy_gan,
    "hbg": make_hbg,
    "ghbg": make_ghbg,
    "gghbg": make_gghbg,
}

PROBLEM_DESCRIPTIONS = {
    "cbg": "2-D bilinear game on the nonnegative orthant",
    "ratio_game": "Von Neumann ratio game on two 2-simplices (non-monotone)",
    "forsaken": "Forsaken game with limit cycles; constraint=ball4|x1_min|x2_min",
    "toy_gan": "sample-average toy GAN on a radius-2 ball; num_samples, seed",
    "hbg": "high-dimensional bilinear game on simplices; eta, n, seed",
    "ghbg": "random PSD bilinear game on shifted simplices; eta, n_per_player, seed",
    "gghbg": "random PSD bilinear game on box + equalities; eta, n_per_player, seed, n_eq",
}


def build_problem(name, params=None, seed=None):
    """Construct a registered problem; ``seed`` fills the ``seed`` parameter when accepted."""
    if name not in PROBLEMS:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(PROBLEMS)}")
    kwargs = dict(params or {})
    if seed is not None and name in ("toy_gan", "hbg", "ghbg", "gghbg"):
        kwargs.setdefault("seed", seed)
    problem = PROBLEMS[name](**kwargs)
    return problem
