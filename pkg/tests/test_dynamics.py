from __future__ import annotations

import math

import numpy as np
import pytest

from windinspect.dynamics import (VehicleParams, WindModel, hover_control, integrate_step, make_state,
                                  quaternion_yaw, state_derivative, state_jacobian, wind_accel)
from windinspect.errors import InvalidParameterError, InvalidSpecError, NumericFault

P = VehicleParams()


def random_state(rng):
    q = rng.normal(size=4)
    return make_state(rng.uniform(-5, 5, 3), rng.uniform(-3, 3, 3), q / np.linalg.norm(q))


def random_control(rng):
    return np.concatenate([rng.uniform(-1.5, 1.5, 3), [rng.uniform(3.0, 20.0)]])


def test_hover_is_equilibrium():
    assert np.all(state_derivative(make_state(), hover_control(P)) == 0.0)


def test_zero_thrust_falls():
    xd = state_derivative(make_state(), np.zeros(4))
    expected = np.zeros(10)
    expected[5] = -P.gravity
    assert np.allclose(xd, expected, atol=0, rtol=0)


def test_yaw_rate_quaternion_rate():
    xd = state_derivative(make_state(), [0.0, 0.0, 1.0, P.hover_thrust])
    assert xd[8] == pytest.approx(0.5)
    assert xd[9] == pytest.approx(0.0)


def test_hover_drift():
    x = make_state((1.0, 2.0, 3.0))
    for _ in range(1000):
        x = integrate_step(x, hover_control(P), dt=0.01)
    assert np.max(np.abs(x[0:3] - [1.0, 2.0, 3.0])) < 1e-9


def test_free_fall():
    x = make_state()
    for _ in range(100):
        x = integrate_step(x, np.zeros(4), dt=0.01)
    assert x[2] == pytest.approx(-0.5 * P.gravity, abs=1e-4)
    assert x[5] == pytest.approx(-P.gravity, abs=1e-4)


def test_constant_roll_rate():
    x = make_state()
    u = [0.5, 0.0, 0.0, P.hover_thrust]
    for _ in range(200):
        x = integrate_step(x, u, dt=0.01)
    # closed form: rotation of 1 rad about body x
    expected = np.array([math.sin(0.5), 0.0, 0.0, math.cos(0.5)])
    assert np.max(np.abs(x[6:10] - expected)) < 1e-5
    roll = math.atan2(2 * (x[9] * x[6] + x[7] * x[8]), 1 - 2 * (x[6] ** 2 + x[7] ** 2))
    assert roll == pytest.approx(1.0, abs=1e-5)


def test_yaw_rate_heading():
    x = make_state()
    u = [0.0, 0.0, 1.0, P.hover_thrust]
    for _ in range(150):
        x = integrate_step(x, u, dt=0.01)
    assert quaternion_yaw(x[6:10]) == pytest.approx(1.5, abs=1e-6)
    assert np.max(np.abs(x[6:10] - [0.0, 0.0, math.sin(0.75), math.cos(0.75)])) < 1e-6


def test_quaternion_norm_every_step():
    rng = np.random.default_rng(1)
    x = random_state(rng)
    for _ in range(500):
        x = integrate_step(x, random_control(rng), wind_accel(0.3, WindModel(mean_speed=7.0)), dt=0.01)
        assert abs(np.linalg.norm(x[6:10]) - 1.0) < 1e-9


def test_energy_without_thrust():
    rng = np.random.default_rng(2)
    x = random_state(rng)
    u = np.concatenate([rng.uniform(-1, 1, 3), [0.0]])

    def energy(s):
        return 0.5 * np.dot(s[3:6], s[3:6]) + P.gravity * s[2]

    e0 = energy(x)
    for _ in range(100):
        x = integrate_step(x, u, dt=0.01)
    assert abs(energy(x) - e0) / abs(e0) < 1e-6


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(3)
    eps = 1e-6
    for _ in range(100):
        x = random_state(rng)
        u = random_control(rng)
        a = rng.normal(size=3)
        J = state_jacobian(x, u, a)
        z = np.concatenate([x, u])
        fd = np.empty((10, 14))
        for j in range(14):
            zp, zm = z.copy(), z.copy()
            zp[j] += eps
            zm[j] -= eps
            fd[:, j] = (state_derivative(zp[:10], zp[10:], a) - state_derivative(zm[:10], zm[10:], a)) / (2 * eps)
        scale = np.maximum(1.0, np.abs(fd))
        assert np.max(np.abs(J - fd) / scale) < 1e-5


def test_wind_in_body_frame_matches_inertial_push():
    # facing +y (yaw 90 degrees) the inertial +y push is body +x
    x = make_state(quaternion=(0.0, 0.0, math.sin(math.pi / 4), math.cos(math.pi / 4)))
    xd = state_derivative(x, hover_control(P), (0.0, 1.0, 0.0))
    assert xd[3] == pytest.approx(1.0)
    assert abs(xd[4]) < 1e-12 and abs(xd[5]) < 1e-12


def test_integrate_rejects_bad_dt():
    for dt in (0.0, -0.01, 0.06):
        with pytest.raises(InvalidParameterError):
            integrate_step(make_state(), hover_control(P), dt=dt)


def test_integrate_numeric_fault():
    with pytest.raises(NumericFault):
        integrate_step(make_state(), [0.0, 0.0, 0.0, np.inf])


def test_wind_null():
    w = WindModel(mean_speed=0.0, sinusoid_std=0.0)
    assert np.all(wind_accel(np.linspace(0, 30, 31), w) == 0.0)


def test_wind_statistics():
    w = WindModel(mean_speed=4.0, sinusoid_std=0.5, sinusoid_period=10.0)
    t = np.arange(0, 100.0, 0.001)
    v = w.speed(t)
    assert v.max() == pytest.approx(4 + 0.5 * math.sqrt(2), abs=1e-6)
    assert v.min() == pytest.approx(4 - 0.5 * math.sqrt(2), abs=1e-6)
    assert np.std(v) == pytest.approx(0.5, rel=0.01)
    assert np.mean(v) == pytest.approx(4.0, abs=1e-9)


def test_wind_periodic_and_direction():
    w = WindModel(mean_speed=4.0)
    a = wind_accel(np.array([1.3, 11.3]), w)
    assert np.max(np.abs(a[0] - a[1])) < 1e-12
    assert a[0, 0] == 0.0 and a[0, 2] == 0.0
    assert a[0, 1] == pytest.approx(0.3 / P.mass * w.speed(1.3))


def test_wind_time_invariant_without_sinusoid():
    a = wind_accel(np.linspace(0, 50, 101), WindModel(mean_speed=4.0, sinusoid_std=0.0))
    assert np.all(a == a[0])


def test_wind_rejects_negative_time():
    with pytest.raises(InvalidParameterError):
        wind_accel(-1.0, WindModel())


@pytest.mark.parametrize("kwargs", [{"sinusoid_period": 0.0}, {"sinusoid_std": -1.0}, {"direction": (1.0, 1.0, 0.0)}])
def test_wind_invalid(kwargs):
    with pytest.raises(InvalidSpecError):
        WindModel(**kwargs)


def test_vehicle_invalid():
    with pytest.raises(InvalidSpecError):
        VehicleParams(mass=0.0)
