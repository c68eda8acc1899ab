from __future__ import annotations

import math

import numba as nb
import numpy as np
import pytest

from windinspect.controllers import REF_DIM, VT_NMPC, make_objective
from windinspect.dynamics import VehicleParams, integrate_step, make_state, yaw_quaternion
from windinspect.errors import InvalidParameterError, InvalidSpecError, NumericFault
from windinspect.ocp import (OcpSolution, RtiSolver, SolverConfig, StageResidualSpec, condense, hover_solution,
                             objective_value, rti_step, shift_warm_start, solve_box_qp)
from windinspect.simulator import ScenarioConfig

P = VehicleParams()
CFG = SolverConfig()
VT = make_objective(VT_NMPC)


def static_refs(p, n, horizon=30):
    rows = np.zeros((horizon + 1, REF_DIM))
    rows[:, 0:3] = p
    rows[:, 3:6] = n
    return rows


def rollout(x0, controls, config=CFG):
    xs = [np.asarray(x0, float)]
    for u in controls:
        xs.append(integrate_step(xs[-1], u, dt=config.stage_duration))
    return np.array(xs)


@nb.njit(cache=True)
def _track_control(x, u, ref, prm):
    return u - ref[0:4]


@nb.njit(cache=True)
def _no_terminal(x, ref, prm):
    return np.zeros(1)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    p = np.array([0.0, 0.0, 100.0])
    n = np.array([1.0, 0.0, 0.0])
    refs = static_refs(p, n)
    lower, upper = CFG.bounds(P)
    worst = 0.0
    for _ in range(20):
        x0 = make_state(p + 7 * n + rng.normal(0, 0.8, 3), rng.normal(0, 0.3, 3),
                        yaw_quaternion(math.pi + rng.normal(0, 0.3)) + np.r_[rng.normal(0, 0.03, 3), 0.0])
        us = np.clip([0, 0, 0, P.hover_thrust] + rng.normal(0, [0.2, 0.2, 0.2, 0.5], (30, 4)), lower, upper)
        warm = OcpSolution(rollout(x0, us), us)
        _, grad, _ = condense(x0, refs, warm, VT, CFG, P)
        eps = 1e-5
        flat = us.ravel()
        fd = np.empty_like(flat)
        for j in range(flat.size):
            up, dn = flat.copy(), flat.copy()
            up[j] += eps
            dn[j] -= eps
            fd[j] = (objective_value(x0, refs, up.reshape(30, 4), VT, CFG, P)
                     - objective_value(x0, refs, dn.reshape(30, 4), VT, CFG, P)) / (2 * eps)
        rel = np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12)
        worst = max(worst, rel)
    assert worst < 1e-4


def test_zero_residual_fixed_point():
    p = np.array([5.0, -3.0, 80.0])
    n = np.array([0.0, -1.0, 0.0])
    x0 = make_state(p + 7 * n, quaternion=yaw_quaternion(math.pi / 2))
    u, sol = rti_step(x0, static_refs(p, n), None, VT, CFG, P)
    assert np.max(np.abs(u - [0.0, 0.0, 0.0, P.hover_thrust])) < 1e-6
    assert np.array_equal(sol.states[0], x0)


def test_displacement_tilts_toward_reference():
    p = np.array([0.0, 0.0, 100.0])
    n = np.array([1.0, 0.0, 0.0])
    x0 = make_state(p + 7.5 * n, quaternion=yaw_quaternion(math.pi))
    refs = static_refs(p, n)
    warm = hover_solution(x0, CFG, P)
    _, grad, _ = condense(x0, refs, warm, VT, CFG, P)
    u, _ = rti_step(x0, refs, warm, VT, CFG, P)
    # facing -x, moving back toward the stand-off point is body-forward:
    # thrust must tilt forward, which is a positive pitch rate
    assert grad[1] < 0
    assert u[1] > 0
    assert abs(u[0]) < 1e-6 * max(1.0, abs(u[1]))


def test_rate_demand_clipped_to_bound():
    spec = StageResidualSpec(_track_control, _no_terminal, np.ones(4) * 100.0, np.zeros(1), np.zeros(1), 4)
    refs = np.zeros((31, 4))
    refs[:, 2] = math.radians(200.0)
    refs[:, 3] = P.hover_thrust
    u, sol = rti_step(make_state(), refs, None, spec, CFG, P)
    assert u[2] == math.radians(100.0)
    assert np.all(sol.controls[:, 2] == math.radians(100.0))


def test_controls_always_within_bounds():
    rng = np.random.default_rng(12)
    lower, upper = CFG.bounds(P)
    p = np.array([0.0, 0.0, 100.0])
    n = np.array([0.0, 1.0, 0.0])
    refs = static_refs(p, n)
    for _ in range(30):
        x0 = make_state(p + rng.normal(0, 6, 3), rng.normal(0, 3, 3), rng.normal(size=4))
        u, sol = rti_step(x0, refs, None, VT, CFG, P)
        assert np.all(sol.controls >= lower) and np.all(sol.controls <= upper)
        assert np.all(u >= lower) and np.all(u <= upper)


def test_box_qp_against_projected_gradient_optimality():
    rng = np.random.default_rng(13)
    for _ in range(50):
        M = rng.normal(size=(8, 8))
        H = M @ M.T + 0.1 * np.eye(8)
        g = rng.normal(size=8) * 5
        lo, hi = -np.ones(8), np.ones(8)
        x, _, ok = solve_box_qp(H, g, lo, hi)
        assert ok
        grad = H @ x + g
        # KKT: free variables have zero gradient, bound ones push outward
        free = (x > lo + 1e-9) & (x < hi - 1e-9)
        assert np.max(np.abs(grad[free]), initial=0.0) < 1e-8
        assert np.all(grad[x <= lo + 1e-9] >= -1e-8)
        assert np.all(grad[x >= hi - 1e-9] <= 1e-8)


def test_box_qp_rejects_crossed_bounds():
    with pytest.raises(InvalidParameterError):
        solve_box_qp(np.eye(2), np.zeros(2), np.ones(2), -np.ones(2))


def test_degraded_flag_when_qp_iterations_exhausted():
    cfg = SolverConfig(max_qp_iterations=1)
    p = np.array([0.0, 0.0, 100.0])
    n = np.array([1.0, 0.0, 0.0])
    x0 = make_state(p + 20 * n + [0, 8, 6], quaternion=yaw_quaternion(0.0))
    _, sol = rti_step(x0, static_refs(p, n), None, VT, cfg, P)
    assert sol.degraded


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_state_is_numeric_fault():
    x0 = make_state((1e308, 0, 0))
    x0[3] = np.inf
    with pytest.raises(NumericFault):
        rti_step(x0, static_refs((0, 0, 0), (1, 0, 0)), None, VT, CFG, P)


def test_shapes_checked():
    with pytest.raises(InvalidParameterError):
        rti_step(np.zeros(9), static_refs((0, 0, 0), (1, 0, 0)), None, VT, CFG, P)
    with pytest.raises(InvalidParameterError):
        rti_step(make_state(), static_refs((0, 0, 0), (1, 0, 0), horizon=10), None, VT, CFG, P)


def test_shift_hover_is_identity():
    sol = hover_solution(make_state((1, 2, 3)), CFG, P)
    out = shift_warm_start(sol)
    assert np.array_equal(out.states, sol.states) and np.array_equal(out.controls, sol.controls)


def test_shift_ramp():
    xs = np.arange(31 * 10, dtype=float).reshape(31, 10)
    us = np.arange(30 * 4, dtype=float).reshape(30, 4)
    out = shift_warm_start(OcpSolution(xs, us))
    assert np.array_equal(out.controls[:-1], us[1:])
    assert np.array_equal(out.states[:-1], xs[1:])


def test_repeated_shift_collapses_to_terminal():
    rng = np.random.default_rng(14)
    sol = OcpSolution(rng.normal(size=(31, 10)), rng.normal(size=(30, 4)))
    out = sol
    for _ in range(30):
        out = shift_warm_start(out)
    assert np.all(out.states == sol.states[-1])
    assert np.all(out.controls == sol.controls[-1])


def test_deterministic_output():
    p = np.array([0.0, 0.0, 100.0])
    n = np.array([1.0, 0.0, 0.0])
    x0 = make_state(p + [7.4, 0.3, -0.2], quaternion=yaw_quaternion(3.0))
    a = rti_step(x0, static_refs(p, n), None, VT, CFG, P)
    b = rti_step(x0, static_refs(p, n), None, VT, CFG, P)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1].states, b[1].states)


def test_objective_non_increasing_without_disturbance():
    # the closed loop runs at 10 ms with the scenario's shooting grid
    config = ScenarioConfig().solver
    p = np.array([0.0, 0.0, 100.0])
    n = np.array([1.0, 0.0, 0.0])
    x = make_state(p + [7.6, 0.4, -0.3], quaternion=yaw_quaternion(3.0))
    refs = static_refs(p, n)
    solver = RtiSolver(VT, config, P)
    values = []
    for _ in range(600):
        u, sol = solver.step(x, refs)
        values.append(sol.objective)
        x = integrate_step(x, u, dt=0.01)
    values = np.array(values[5:])
    assert np.all(np.diff(values) <= 1e-9 * np.maximum(1.0, values[:-1]))


def test_solver_config_validation():
    for kwargs in ({"horizon": 0}, {"stage_duration": 0.0}, {"thrust_min_factor": 3.0}, {"qp_tolerance": 0.0}):
        with pytest.raises(InvalidSpecError):
            SolverConfig(**kwargs)
    lower, upper = SolverConfig().bounds(P)
    assert np.allclose(lower, [-math.radians(100)] * 3 + [0.3 * P.hover_thrust])
    assert np.allclose(upper, [math.radians(100)] * 3 + [2.0 * P.hover_thrust])
