import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cvisolve.acvi import (
    _ball_prox,
    _box_prox,
    _one_sided_prox,
    acvi_inexact_run,
    acvi_run,
    barrier_gradient_descent,
    barrier_prox_objective,
    solve_x_subproblem,
    solve_y_subproblem,
    update_lambda,
)
from cvisolve.core import (
    AcviConfig,
    InfeasibleWarmStart,
    InnerOptimizer,
    ProblemInstance,
    SingularSystem,
    VectorField,
    ball_constraints,
    box_constraints,
    orthant_constraints,
    simplex_constraints,
)
from cvisolve.linops import build_equality_projector
from cvisolve.problems import make_cbg, make_ghbg, make_hbg
from oracles import central_gradient

CBG_REF = dict(beta=0.08, mu_init=1e-5, delta=0.5)
REF_RUNS = [(19, 1), (1, 31)]


def _no_eq(n):
    return build_equality_projector(np.zeros((0, n)), np.zeros(0))


def test_x_solve_identity_field():
    F = VectorField.from_affine(np.eye(2))
    x = solve_x_subproblem(F, _no_eq(2), np.array([2.0, 2.0]), np.zeros(2), 1.0)
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-12)


def test_x_solve_cbg_affine_matches_newton():
    p = make_cbg()
    proj = _no_eq(2)
    y, lam = np.array([0.5, 0.5]), np.zeros(2)
    xa = solve_x_subproblem(p.field, proj, y, lam, 0.08, mode="affine_closed_form")
    xn = solve_x_subproblem(p.field, proj, y, lam, 0.08, mode="newton", x_warm=y)
    np.testing.assert_allclose(xa, xn, atol=1e-10)
    A = p.field.affine[0]
    np.testing.assert_allclose((np.eye(2) + A / 0.08) @ xa, y, atol=1e-12)


def test_x_solve_with_equalities_lands_on_affine_set():
    p = make_hbg(0.3, n=10)
    proj = build_equality_projector(p.constraints.C, p.constraints.d)
    rng = np.random.default_rng(0)
    x = solve_x_subproblem(p.field, proj, rng.random(10), rng.standard_normal(10), 0.5)
    np.testing.assert_allclose(p.constraints.C @ x, p.constraints.d, atol=1e-12)


def test_singular_affine_system_detected():
    # I + A / beta singular for beta = 1
    F = VectorField.from_affine(-np.eye(2))
    with pytest.raises(SingularSystem):
        solve_x_subproblem(F, _no_eq(2), np.ones(2), np.zeros(2), 1.0)


def test_inner_first_order_approaches_exact_root():
    p = make_cbg()
    proj = _no_eq(2)
    y, lam = np.array([0.5, 0.2]), np.array([0.1, 0.0])
    exact = solve_x_subproblem(p.field, proj, y, lam, 0.5)
    for opt in ("gda", "eg"):
        x = solve_x_subproblem(p.field, proj, y, lam, 0.5, mode="inner_first_order",
                               inner=InnerOptimizer(opt, 400, 0.05))
        np.testing.assert_allclose(x, exact, atol=1e-8)


@given(st.floats(-50, 50), st.floats(1e-12, 10))
def test_one_sided_prox_root(a, t):
    z = float(_one_sided_prox(np.array([a]), t)[0])
    assert z > 0
    assert abs(z * z - a * z - t) <= 1e-9 * max(1.0, z * z, abs(a * z))


def test_one_sided_prox_stable_for_large_negative_shift():
    # naive (a + sqrt(a^2 + 4t)) / 2 cancels to 0 here
    z = _one_sided_prox(np.array([-1e8]), 1e-12)[0]
    assert z == pytest.approx(1e-20, rel=1e-10)


def _prox_grad(cons, y, c, beta, mu):
    _, grad, _ = barrier_prox_objective(cons, c, beta, mu)
    return grad(y)


@pytest.mark.parametrize("cons", [
    orthant_constraints(3),
    box_constraints([-1.0, 0.0, -np.inf], [1.0, np.inf, 2.0]),
    ball_constraints([0.5, -0.5, 0.0], 1.5),
    simplex_constraints((3,)),
])
def test_closed_form_y_matches_newton_and_is_stationary(cons):
    rng = np.random.default_rng(4)
    beta, mu = 0.5, 1e-3
    warm = {"orthant": np.ones(3), "box": np.array([0.0, 1.0, 0.0]),
            "euclidean_ball": np.array([0.5, -0.5, 0.0]), "simplex": np.full(3, 1 / 3)}
    for _ in range(20):
        x, lam = 2 * rng.standard_normal(3), rng.standard_normal(3)
        yc = solve_y_subproblem(cons, x, lam, beta, mu, mode="structural_closed_form")
        yn = solve_y_subproblem(cons, x, lam, beta, mu, mode="damped_newton",
                                y_warm=warm[cons.structure.kind])
        assert cons.strictly_feasible(yc)
        np.testing.assert_allclose(yc, yn, atol=1e-8)
        g = _prox_grad(cons, yc, x + lam / beta, beta, mu)
        assert np.max(np.abs(g)) <= 1e-9


def test_box_prox_tiny_barrier():
    y = _box_prox(np.array([5.0, -5.0, 0.3]), np.zeros(3), np.ones(3), 1e-14, 1e-14)
    assert np.all((y > 0) & (y < 1))
    np.testing.assert_allclose(y, [1.0, 0.0, 0.3], atol=1e-12)


def test_ball_prox_far_outside():
    y = _ball_prox(np.array([10.0, 0.0]), np.zeros(2), 2.0, 1e-6, 1e-14)
    assert np.linalg.norm(y) < 2.0 and y[0] == pytest.approx(2.0, abs=1e-6)


def test_barrier_gradient_matches_differences():
    cons = ball_constraints([0.0, 0.0], 2.0)
    value, grad, hess = barrier_prox_objective(cons, np.array([0.3, 1.0]), 0.7, 0.01)
    y = np.array([0.4, -0.9])
    np.testing.assert_allclose(grad(y), central_gradient(value, y), rtol=1e-6)
    assert value(np.array([3.0, 0.0])) == np.inf


def test_damped_newton_y_needs_feasible_warm_start():
    cons = orthant_constraints(2)
    with pytest.raises(InfeasibleWarmStart):
        solve_y_subproblem(cons, np.ones(2), np.zeros(2), 1.0, 1e-3, mode="damped_newton",
                           y_warm=np.array([-1.0, 1.0]))


def test_barrier_gradient_descent_decreases_and_stays_inside():
    cons = orthant_constraints(2)
    x, lam, beta, mu = np.array([-1.0, 2.0]), np.zeros(2), 1.0, 1e-2
    value, _, _ = barrier_prox_objective(cons, x, beta, mu)
    y0 = np.array([1.0, 1.0])
    y = barrier_gradient_descent(cons, x, lam, beta, mu, y0, 3000, 0.5)
    assert cons.strictly_feasible(y) and value(y) < value(y0)
    exact = solve_y_subproblem(cons, x, lam, beta, mu)
    np.testing.assert_allclose(y, exact, atol=1e-6)


def test_lambda_update():
    np.testing.assert_allclose(update_lambda(np.ones(2), np.array([2.0, 0.0]), np.zeros(2), 0.5),
                               [2.0, 1.0])


def test_zero_inner_iterations_gives_initial_state_only():
    tr = acvi_run(make_cbg(), AcviConfig(outer_iters=3, inner_iters=0))
    assert len(tr) == 1 and (tr.final.t, tr.final.k) == (0, 0)


def test_cbg_reference_run():
    p = make_cbg()
    tr = acvi_run(p, AcviConfig.from_runs(REF_RUNS, **CBG_REF))
    assert len(tr) == 51
    assert [r.t for r in tr.records[1:21]] == list(range(20))
    # frozen from the reference run
    assert tr.final.metrics["dist_to_solution"] == pytest.approx(0.0039575978458479075, rel=1e-6)
    assert tr.final.metrics["dist_to_solution"] < 1e-2
    mus = [r.metrics["mu"] for r in tr.records[1:]]
    assert mus[0] == pytest.approx(5e-6) and mus[-1] == pytest.approx(1e-5 * 0.5**20)


def test_budget_caps_updates_and_callback_stops():
    p = make_cbg()
    cfg = AcviConfig.from_runs(REF_RUNS, **CBG_REF)
    assert len(acvi_run(p, cfg, max_updates=7)) == 8
    tr = acvi_run(p, cfg, callback=lambda r: r.metrics["dist_to_solution"] < 0.05)
    assert tr.final.metrics["dist_to_solution"] < 0.05 and len(tr) < 51


def test_infeasible_initial_y_rejected():
    with pytest.raises(InfeasibleWarmStart):
        acvi_run(make_cbg(), AcviConfig(y_init=np.array([0.0, 1.0])))


def test_solver_error_carries_iteration():
    # F = -x is anti-monotone; I + A / beta is singular at beta = 1
    p = ProblemInstance("anti", VectorField.from_affine(-np.eye(2)), orthant_constraints(2),
                        np.ones(2))
    with pytest.raises(SingularSystem):
        acvi_run(p, AcviConfig(beta=1.0))
    p2 = ProblemInstance("anti", VectorField(2, lambda x: -x, lambda x: -np.eye(2)),
                         orthant_constraints(2), np.ones(2))
    with pytest.raises(Exception) as info:
        acvi_run(p2, AcviConfig(beta=1.0, x_solver="newton"))
    assert info.value.t == 0 and info.value.k == 0


def test_inexact_tracks_exact_on_ghbg():
    p = make_ghbg(0.5, 20, 0)
    base = dict(beta=0.5, mu_init=1e-6, delta=0.5)
    exact = acvi_run(p, AcviConfig.from_runs(REF_RUNS, **base))
    cfg = AcviConfig.from_runs(REF_RUNS, x_solver="inner_first_order",
                               inner=InnerOptimizer("gda", 20, 0.5, 1.0), **base)
    inexact = acvi_inexact_run(p, cfg)
    dev = np.max(np.abs(inexact.metric("dist_to_solution") - exact.metric("dist_to_solution")))
    assert dev <= 1e-4
    with pytest.raises(ValueError):
        acvi_inexact_run(p, AcviConfig())
