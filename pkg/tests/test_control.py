import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memtransfer.control import (
    AdjointTrajectory,
    CostWeights,
    OptimizerOptions,
    RealState,
    cost_and_gradient,
    gradient,
    hamilton_function,
    optimize,
    running_cost,
    select_t2,
    solve_adjoint,
    step_weight,
    total_cost,
)
from memtransfer.linesearch import wolfe_search
from memtransfer.presets import lambda_system
from memtransfer.signals import ControlSignal, TimeGrid, Trajectory
from memtransfer.zero_dynamics import TerminalCondition, build_zero_dynamics, solve_backward

from test_zero_dynamics import random_control

W = CostWeights(10.0, 1.0, 1e4, 20.0, -2.6)


@pytest.fixture(scope="module")
def lam():
    zd = build_zero_dynamics(lambda_system())
    return zd, TimeGrid(-20.0, 0.0, 2000), TerminalCondition([1.0], 0.0)


def test_step_weight():
    assert step_weight(-20.0, W, -20.0, 0.0) == -20.0
    assert step_weight(W.t2, W) == 20.0
    assert step_weight(0.5 * (W.t2 + 0.0), W) == 20.0
    with pytest.raises(ValueError):
        step_weight(0.5, W, -20.0, 0.0)


def test_weights_validated():
    with pytest.raises(ValueError):
        CostWeights(-1.0, 1.0, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        W.check_window(TimeGrid(-2.0, 0.0, 10))


def test_real_state_round_trip():
    x = np.array([1 + 2j, -0.5j, 3.0])
    rs = RealState.from_complex(x)
    np.testing.assert_array_equal(rs.to_complex(), x)
    np.testing.assert_array_equal(rs.vector(), [1, 0, 3, 2, -0.5, 0])


def test_running_cost_trivial(lam):
    zd = lam[0]
    assert running_cost(np.zeros(3), 0.0, -5.0, zd, W) == W.alpha
    # memory-only state: xi = 0 and xi' = 0
    assert running_cost(np.array([0, 0, 1.0]), 0.7, -5.0, zd, W) == pytest.approx(W.alpha + 0.49)


def test_total_cost_trivial(lam):
    zd, grid, _ = lam
    zero = TerminalCondition([0.0], 0.0)
    assert total_cost(ControlSignal.constant(grid, 0.0), zd, zero, W) == pytest.approx(W.alpha * 20.0, rel=1e-12)
    u = random_control(grid, 0)
    expected = W.alpha * 20.0 + W.beta * grid.integrate(u.values ** 2)
    assert total_cost(u, zd, zero, W) == pytest.approx(expected, rel=1e-12)
    frozen = total_cost(ControlSignal.constant(grid, 0.0), zd, TerminalCondition([1.0], 0.0), W)
    assert frozen == pytest.approx(W.alpha * 20.0 + W.gamma, rel=1e-12)


def test_hamilton_trivial(lam):
    zd = lam[0]
    rng = np.random.default_rng(0)
    x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    assert hamilton_function(x, 0.4, np.zeros(6), -1.0, zd, W) == running_cost(x, 0.4, -1.0, zd, W)
    w0 = CostWeights(0.0, 1.0, 1.0, 20.0, -2.6)
    assert hamilton_function(np.zeros(3), 0.4, rng.standard_normal(6), -1.0, zd, w0) == pytest.approx(0.16)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), u=st.floats(-2, 2))
def test_hamilton_control_derivative(seed, u):
    zd = build_zero_dynamics(lambda_system())
    rng = np.random.default_rng(seed)
    x = 0.05 * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
    p = rng.standard_normal(6)
    grid = TimeGrid(-1.0, 0.0, 1)
    traj = Trajectory(grid, np.array([x, x]))
    analytic = gradient(ControlSignal.constant(grid, u), traj, AdjointTrajectory(grid, np.array([p, p])), zd, W)[0]
    h = 1e-5
    fd = (hamilton_function(x, u + h, p, -1.0, zd, W) - hamilton_function(x, u - h, p, -1.0, zd, W)) / (2 * h)
    assert abs(fd - analytic) <= 1e-6 * max(1.0, abs(fd))


def test_adjoint_vanishes_without_state_cost(lam):
    zd, grid, term = lam
    u = random_control(grid, 1)
    x = solve_backward(zd, u, term)
    p = solve_adjoint(u, x, zd, CostWeights(0.0, 1.0, 0.0, 20.0, -2.6))
    assert not np.any(p.p)
    zero = Trajectory(grid, np.zeros_like(x.states))
    assert not np.any(solve_adjoint(u, zero, zd, W).p)


def test_adjoint_initial_value(lam):
    zd, grid, term = lam
    u = random_control(grid, 2)
    x = solve_backward(zd, u, term)
    p = solve_adjoint(u, x, zd, W)
    x0 = x.initial
    np.testing.assert_array_equal(p.p[0], 2 * W.gamma * np.concatenate([x0.real, x0.imag]))


def test_gradient_is_2beta_u_for_control_energy_only(lam):
    zd, grid, term = lam
    u = random_control(grid, 3)
    w = CostWeights(0.0, 1.7, 0.0, 20.0, -2.6)
    x = solve_backward(zd, u, term)
    g = gradient(u, x, solve_adjoint(u, x, zd, w), zd, w)
    np.testing.assert_array_equal(g, 2 * 1.7 * u.values)
    _, gd = cost_and_gradient(u, zd, term, w)
    np.testing.assert_allclose(gd, 2 * 1.7 * u.values, rtol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_continuous_adjoint_functional_derivative(lam, seed):
    zd, grid, term = lam
    t = grid.times
    u = ControlSignal(grid, 1 + 0.3 * np.sin(t) + 0.2 * np.cos(0.3 * t))
    x = solve_backward(zd, u, term)
    g = gradient(u, x, solve_adjoint(u, x, zd, W), zd, W)
    du = random_control(grid, 100 + seed).values
    eps = 1e-5
    jp = total_cost(ControlSignal(grid, u.values + eps * du), zd, term, W)
    jm = total_cost(ControlSignal(grid, u.values - eps * du), zd, term, W)
    fd = (jp - jm) / (2 * eps)
    assert abs(fd - grid.integrate(g * du)) <= 1e-3 * abs(fd)


def test_discrete_gradient_matches_bumps(lam):
    zd, grid, term = lam
    rng = np.random.default_rng(4)
    # near the constant baseline J stays moderate, keeping the difference quotient clean
    u = ControlSignal(grid, 1.0 + 0.2 * (random_control(grid, 4).values - 1.0))
    _, g = cost_and_gradient(u, zd, term, W)
    wts = grid.trapezoid_weights()
    for k in rng.choice(len(grid), 10, replace=False):
        h = 1e-3
        up, um = u.values.copy(), u.values.copy()
        up[k] += h
        um[k] -= h
        fd = (total_cost(ControlSignal(grid, up), zd, term, W)
              - total_cost(ControlSignal(grid, um), zd, term, W)) / (2 * h)
        assert abs(fd - g[k] * wts[k]) <= 1e-4 * abs(fd)


def test_control_energy_only_converges_to_zero(lam):
    zd, grid, term = lam
    w = CostWeights(0.0, 1.0, 0.0, 20.0, -2.6)
    res = optimize(zd, term, w, random_control(grid, 5), OptimizerOptions(tol=1e-8))
    assert res.iterations <= 2
    assert np.max(np.abs(res.u_opt.values)) <= 1e-8
    assert res.termination_reason == "gradient-small"


def test_short_run_descends(lam):
    zd, grid, term = lam
    res = optimize(zd, term, W, ControlSignal.constant(grid, 1.0), OptimizerOptions(max_iters=30))
    assert res.termination_reason == "max-iters" and res.iterations == 30
    assert np.all(np.diff(res.cost_history) < 0)
    assert res.cost < total_cost(ControlSignal.constant(grid, 1.0), zd, term, W)
    assert len(res.grad_norm_history) == len(res.cost_history)
    d = res.to_dict()
    assert d["termination_reason"] == "max-iters" and d["t2_used"] == W.t2


def test_optimize_rejects_bad_t2(lam):
    zd, grid, term = lam
    with pytest.raises(ValueError):
        optimize(zd, term, CostWeights(10, 1, 1e4, 20, 5.0), ControlSignal.constant(grid, 1.0))


def test_select_t2_single_candidate_equals_optimize(lam):
    zd, grid, term = lam
    opts = OptimizerOptions(max_iters=5)
    u0 = ControlSignal.constant(grid, 1.0)
    t2, res = select_t2(u0, zd, term, W, [-4.0], opts)
    direct = optimize(zd, term, CostWeights(10, 1, 1e4, 20, -4.0), u0, opts)
    assert t2 == -4.0
    assert res.cost_history == direct.cost_history
    assert res.candidate_costs == {-4.0: direct.cost}


def test_select_t2_picks_cheapest(lam):
    zd, grid, term = lam
    cands = [-8.0, -6.0, -4.0, -2.6, -1.0]
    t2, res = select_t2(ControlSignal.constant(grid, 1.0), zd, term, W, cands, OptimizerOptions(max_iters=10))
    assert set(res.candidate_costs) == set(cands)
    assert t2 == min(res.candidate_costs, key=res.candidate_costs.get)
    assert res.t2_used == t2
    with pytest.raises(ValueError):
        select_t2(ControlSignal.constant(grid, 1.0), zd, term, W, [])


# line search


def test_wolfe_on_quadratic_expands_and_backtracks():
    def phi(t, need):
        return (t - 1.0) ** 2, (2 * (t - 1.0) if need else None), t

    for step0 in (1e-3, 1.0, 50.0):
        r = wolfe_search(phi, 1.0, -2.0, step0)
        assert r.success
        assert r.value <= 1.0 + 1e-4 * r.step * -2.0
        assert r.slope >= 0.9 * -2.0


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0.1, 100), b=st.floats(0.01, 10), step0=st.floats(1e-6, 1e3))
def test_wolfe_conditions_hold(a, b, step0):
    # phi(t) = a (t - b)^2 - a b^2 has phi(0) = 0 and phi'(0) = -2ab
    def phi(t, need):
        return a * (t - b) ** 2 - a * b * b, (2 * a * (t - b) if need else None), None

    d0 = -2 * a * b
    r = wolfe_search(phi, 0.0, d0, step0)
    assert r.success
    assert r.value <= 1e-4 * r.step * d0 and r.slope >= 0.9 * d0


def test_wolfe_failure_and_bad_direction():
    r = wolfe_search(lambda t, need: (math.inf, None, None), 1.0, -1.0, 1.0, max_trials=7)
    assert not r.success and r.trials == 7 and r.step == 0.0
    with pytest.raises(ValueError):
        wolfe_search(lambda t, need: (0.0, 0.0, None), 1.0, 1.0, 1.0)


def test_select_t2_refine_continues_the_winner(lam):
    zd, grid, term = lam
    u0 = ControlSignal.constant(grid, 1.0)
    t2, res = select_t2(u0, zd, term, W, [-4.0, -2.6], OptimizerOptions(max_iters=3),
                        refine=OptimizerOptions(max_iters=4))
    assert res.t2_used == t2 == min(res.candidate_costs, key=res.candidate_costs.get)
    assert res.iterations == len(res.cost_history) - 1 == 7
    assert np.all(np.diff(res.cost_history) < 0)
    assert res.cost < res.candidate_costs[t2]
