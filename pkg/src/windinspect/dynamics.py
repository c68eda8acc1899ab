"""Quaternion quadrotor point-mass model, RK4 integration and wind.

State vector layout (10)::

    [x, y, z, u, v, w, qx, qy, qz, qw]

position in the inertial frame (z up), velocity in the body frame, unit
attitude quaternion (vector part first) rotating body to inertial.
Control vector layout (4)::

    [p, q, r, T]

body rates in rad/s and collective thrust in N along body +z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .errors import InvalidParameterError, InvalidSpecError, NumericFault

NX = 10
NU = 4

# state slices
POS = slice(0, 3)
VEL = slice(3, 6)
QUAT = slice(6, 10)


@dataclass(frozen=True)
class VehicleParams:
    mass: float = 1.09
    gravity: float = 9.81

    def __post_init__(self):
        if not self.mass > 0 or not self.gravity > 0:
            raise InvalidSpecError("mass and gravity must be positive")

    @property
    def hover_thrust(self) -> float:
        return self.mass * self.gravity


@dataclass(frozen=True)
class WindModel:
    """Sinusoidal wind: ``mean + sqrt(2) * std * sin(2 pi t / period)`` along ``direction``.

    The wind acts on the plant as linear drag, ``drag_gain / m * v_wind``.
    """

    mean_speed: float = 0.0
    sinusoid_period: float = 10.0
    sinusoid_std: float = 0.5
    direction: tuple[float, float, float] = (0.0, 1.0, 0.0)
    drag_gain: float = 0.3

    def __post_init__(self):
        if not self.sinusoid_period > 0:
            raise InvalidSpecError("sinusoid_period must be positive")
        if self.sinusoid_std < 0:
            raise InvalidSpecError("sinusoid_std must be non-negative")
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (3,) or abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise InvalidSpecError("wind direction must be a unit 3-vector")
        object.__setattr__(self, "direction", tuple(float(v) for v in d))

    def speed(self, t):
        t = np.asarray(t, dtype=float)
        return self.mean_speed + math.sqrt(2.0) * self.sinusoid_std * np.sin(
            2.0 * np.pi * t / self.sinusoid_period
        )


def make_state(position=(0.0, 0.0, 0.0), velocity=(0.0, 0.0, 0.0), quaternion=(0.0, 0.0, 0.0, 1.0)):
    x = np.empty(NX)
    x[POS] = position
    x[VEL] = velocity
    x[QUAT] = quaternion
    x[QUAT] /= np.linalg.norm(x[QUAT])
    return x


def yaw_quaternion(yaw: float) -> np.ndarray:
    return np.array([0.0, 0.0, math.sin(0.5 * yaw), math.cos(0.5 * yaw)])


def quaternion_yaw(q) -> float:
    """Heading angle (Z-Y-X convention) of quaternion ``[qx, qy, qz, qw]``."""
    x, y, z, w = q
    return math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))


def hover_control(params: VehicleParams = VehicleParams()) -> np.ndarray:
    return np.array([0.0, 0.0, 0.0, params.hover_thrust])


# --------------------------------------------------------------------------
# compiled kernels


@nb.njit(cache=True)
def quat_to_rot(q):
    x, y, z, w = q[0], q[1], q[2], q[3]
    R = np.empty((3, 3))
    R[0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[0, 1] = 2.0 * (x * y - z * w)
    R[0, 2] = 2.0 * (x * z + y * w)
    R[1, 0] = 2.0 * (x * y + z * w)
    R[1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[1, 2] = 2.0 * (y * z - x * w)
    R[2, 0] = 2.0 * (x * z - y * w)
    R[2, 1] = 2.0 * (y * z + x * w)
    R[2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return R


@nb.njit(cache=True)
def _rot_partials(q):
    """dR/dq_k for k in (x, y, z, w), shape (4, 3, 3)."""
    x, y, z, w = q[0], q[1], q[2], q[3]
    D = np.zeros((4, 3, 3))
    # d/dx
    D[0, 0, 1] = 2 * y
    D[0, 0, 2] = 2 * z
    D[0, 1, 0] = 2 * y
    D[0, 1, 1] = -4 * x
    D[0, 1, 2] = -2 * w
    D[0, 2, 0] = 2 * z
    D[0, 2, 1] = 2 * w
    D[0, 2, 2] = -4 * x
    # d/dy
    D[1, 0, 0] = -4 * y
    D[1, 0, 1] = 2 * x
    D[1, 0, 2] = 2 * w
    D[1, 1, 0] = 2 * x
    D[1, 1, 2] = 2 * z
    D[1, 2, 0] = -2 * w
    D[1, 2, 1] = 2 * z
    D[1, 2, 2] = -4 * y
    # d/dz
    D[2, 0, 0] = -4 * z
    D[2, 0, 1] = -2 * w
    D[2, 0, 2] = 2 * x
    D[2, 1, 0] = 2 * w
    D[2, 1, 1] = -4 * z
    D[2, 1, 2] = 2 * y
    D[2, 2, 0] = 2 * x
    D[2, 2, 1] = 2 * y
    # d/dw
    D[3, 0, 1] = -2 * z
    D[3, 0, 2] = 2 * y
    D[3, 1, 0] = 2 * z
    D[3, 1, 2] = -2 * x
    D[3, 2, 0] = -2 * y
    D[3, 2, 1] = 2 * x
    return D


@nb.njit(cache=True)
def derivative_kernel(x, u, a_ext, mass, g):
    R = quat_to_rot(x[6:10])
    vb0, vb1, vb2 = x[3], x[4], x[5]
    p, q, r, T = u[0], u[1], u[2], u[3]
    qx, qy, qz, qw = x[6], x[7], x[8], x[9]
    dx = np.empty(10)
    for i in range(3):
        dx[i] = R[i, 0] * vb0 + R[i, 1] * vb1 + R[i, 2] * vb2
    # inertial specific force from gravity and disturbance, rotated into the body frame
    c0 = a_ext[0]
    c1 = a_ext[1]
    c2 = a_ext[2] - g
    fb0 = R[0, 0] * c0 + R[1, 0] * c1 + R[2, 0] * c2
    fb1 = R[0, 1] * c0 + R[1, 1] * c1 + R[2, 1] * c2
    fb2 = R[0, 2] * c0 + R[1, 2] * c1 + R[2, 2] * c2
    dx[3] = r * vb1 - q * vb2 + fb0
    dx[4] = p * vb2 - r * vb0 + fb1
    dx[5] = q * vb0 - p * vb1 + fb2 + T / mass
    dx[6] = 0.5 * (p * qw + r * qy - q * qz)
    dx[7] = 0.5 * (q * qw + p * qz - r * qx)
    dx[8] = 0.5 * (r * qw + q * qx - p * qy)
    dx[9] = 0.5 * (-p * qx - q * qy - r * qz)
    return dx


@nb.njit(cache=True)
def jacobian_kernel(x, u, a_ext, mass, g):
    """Analytic partials of :func:`derivative_kernel`, shape (10, 14) = [d/dx | d/du]."""
    J = np.zeros((10, 14))
    q4 = x[6:10]
    R = quat_to_rot(q4)
    D = _rot_partials(q4)
    vb = x[3:6]
    p, q, r = u[0], u[1], u[2]
    qx, qy, qz, qw = x[6], x[7], x[8], x[9]
    c = np.array([a_ext[0], a_ext[1], a_ext[2] - g])
    # position rows
    for i in range(3):
        for j in range(3):
            J[i, 3 + j] = R[i, j]
        for k in range(4):
            s = 0.0
            for j in range(3):
                s += D[k, i, j] * vb[j]
            J[i, 6 + k] = s
    # velocity rows: -omega x v + R^T c + T/m e3
    J[3, 4] = r
    J[3, 5] = -q
    J[4, 3] = -r
    J[4, 5] = p
    J[5, 3] = q
    J[5, 4] = -p
    for i in range(3):
        for k in range(4):
            s = 0.0
            for j in range(3):
                s += D[k, j, i] * c[j]
            J[3 + i, 6 + k] = s
    J[3, 10 + 1] = -vb[2]
    J[3, 10 + 2] = vb[1]
    J[4, 10 + 0] = vb[2]
    J[4, 10 + 2] = -vb[0]
    J[5, 10 + 0] = -vb[1]
    J[5, 10 + 1] = vb[0]
    J[5, 13] = 1.0 / mass
    # quaternion rows
    J[6, 7] = 0.5 * r
    J[6, 8] = -0.5 * q
    J[6, 9] = 0.5 * p
    J[7, 6] = -0.5 * r
    J[7, 8] = 0.5 * p
    J[7, 9] = 0.5 * q
    J[8, 6] = 0.5 * q
    J[8, 7] = -0.5 * p
    J[8, 9] = 0.5 * r
    J[9, 6] = -0.5 * p
    J[9, 7] = -0.5 * q
    J[9, 8] = -0.5 * r
    J[6, 10] = 0.5 * qw
    J[6, 11] = -0.5 * qz
    J[6, 12] = 0.5 * qy
    J[7, 10] = 0.5 * qz
    J[7, 11] = 0.5 * qw
    J[7, 12] = -0.5 * qx
    J[8, 10] = -0.5 * qy
    J[8, 11] = 0.5 * qx
    J[8, 12] = 0.5 * qw
    J[9, 10] = -0.5 * qx
    J[9, 11] = -0.5 * qy
    J[9, 12] = -0.5 * qz
    return J


@nb.njit(cache=True)
def rk4_kernel(x, u, a_ext, mass, g, dt):
    k1 = derivative_kernel(x, u, a_ext, mass, g)
    k2 = derivative_kernel(x + 0.5 * dt * k1, u, a_ext, mass, g)
    k3 = derivative_kernel(x + 0.5 * dt * k2, u, a_ext, mass, g)
    k4 = derivative_kernel(x + dt * k3, u, a_ext, mass, g)
    xn = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    nq = math.sqrt(xn[6] ** 2 + xn[7] ** 2 + xn[8] ** 2 + xn[9] ** 2)
    for i in range(6, 10):
        xn[i] /= nq
    return xn


@nb.njit(cache=True)
def rk4_sens_kernel(x, u, a_ext, mass, g, dt):
    """RK4 step plus its sensitivities ``A = dx+/dx`` (10x10), ``B = dx+/du`` (10x4)."""
    I = np.eye(10)
    k1 = derivative_kernel(x, u, a_ext, mass, g)
    J1 = jacobian_kernel(x, u, a_ext, mass, g)
    K1x = J1[:, :10].copy()
    K1u = J1[:, 10:].copy()

    x2 = x + 0.5 * dt * k1
    k2 = derivative_kernel(x2, u, a_ext, mass, g)
    J2 = jacobian_kernel(x2, u, a_ext, mass, g)
    F2 = J2[:, :10].copy()
    K2x = F2 @ (I + 0.5 * dt * K1x)
    K2u = F2 @ (0.5 * dt * K1u) + J2[:, 10:]

    x3 = x + 0.5 * dt * k2
    k3 = derivative_kernel(x3, u, a_ext, mass, g)
    J3 = jacobian_kernel(x3, u, a_ext, mass, g)
    F3 = J3[:, :10].copy()
    K3x = F3 @ (I + 0.5 * dt * K2x)
    K3u = F3 @ (0.5 * dt * K2u) + J3[:, 10:]

    x4 = x + dt * k3
    k4 = derivative_kernel(x4, u, a_ext, mass, g)
    J4 = jacobian_kernel(x4, u, a_ext, mass, g)
    F4 = J4[:, :10].copy()
    K4x = F4 @ (I + dt * K3x)
    K4u = F4 @ (dt * K3u) + J4[:, 10:]

    xn = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    A = I + dt / 6.0 * (K1x + 2.0 * K2x + 2.0 * K3x + K4x)
    B = dt / 6.0 * (K1u + 2.0 * K2u + 2.0 * K3u + K4u)

    # quaternion renormalisation and its derivative (I - qq^T)/|q|
    qv = xn[6:10].copy()
    nq = math.sqrt(qv[0] ** 2 + qv[1] ** 2 + qv[2] ** 2 + qv[3] ** 2)
    qh = qv / nq
    N = (np.eye(4) - np.outer(qh, qh)) / nq
    A[6:10, :] = N @ A[6:10, :]
    B[6:10, :] = N @ B[6:10, :]
    xn[6:10] = qh
    return xn, A, B


# --------------------------------------------------------------------------
# public API


def _vec3(a):
    if a is None:
        return np.zeros(3)
    return np.asarray(a, dtype=float).reshape(3)


def state_derivative(state, control, external_accel=None, params: VehicleParams = VehicleParams()):
    """Continuous-time state derivative.

    ``external_accel`` is an inertial-frame acceleration (m/s^2), e.g. from
    :func:`wind_accel`; it is rotated into the body frame internally.
    """
    x = np.asarray(state, dtype=float)
    u = np.asarray(control, dtype=float)
    return derivative_kernel(x, u, _vec3(external_accel), params.mass, params.gravity)


def state_jacobian(state, control, external_accel=None, params: VehicleParams = VehicleParams()):
    """Partials of :func:`state_derivative` w.r.t. ``[state, control]``, shape (10, 14)."""
    x = np.asarray(state, dtype=float)
    u = np.asarray(control, dtype=float)
    return jacobian_kernel(x, u, _vec3(external_accel), params.mass, params.gravity)


def integrate_step(state, control, external_accel=None, params: VehicleParams = VehicleParams(), dt=0.01):
    """One classic RK4 step of length ``dt``; the quaternion is renormalised."""
    if not 0.0 < dt <= 0.05:
        raise InvalidParameterError(f"dt must lie in (0, 0.05] s, got {dt!r}")
    x = np.asarray(state, dtype=float)
    u = np.asarray(control, dtype=float)
    xn = rk4_kernel(x, u, _vec3(external_accel), params.mass, params.gravity, dt)
    if not np.all(np.isfinite(xn)):
        raise NumericFault(f"non-finite state after integration: {xn}")
    return xn


def wind_accel(t, wind: WindModel, params: VehicleParams = VehicleParams()) -> np.ndarray:
    """Inertial acceleration imparted by ``wind`` at time ``t``."""
    if np.any(np.asarray(t) < 0):
        raise InvalidParameterError("wind time must be non-negative")
    v = wind.speed(t)
    return (wind.drag_gain / params.mass) * np.multiply.outer(v, np.asarray(wind.direction))
