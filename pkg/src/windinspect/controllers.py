"""Visual-tracking and baseline NMPC objectives plus the reference generator.

Geometry used throughout, with ``a = p - position`` the vector from the
drone to the inspection point ``p`` and ``n`` the surface normal projected
onto the XY plane and rescaled to unit length:

* heading ``h``: cosine between the plan-view body forward axis and ``a_xy``
* distance ``d = |a_xy|``
* region of interest ``r``: plan-view stand-off of the drone along ``n``,
  ``(position - p)_xy . n``, positive on the outward side of the surface
* orthogonality ``o = |a - (a . n) n|``

At the stand-off pose ``p + d_ref n`` facing ``-n`` all four targets are met
at once: ``h = 1``, ``d = r = d_ref``, ``o = 0``.

Residual kernels take a 9-wide reference row per stage.

* VT-NMPC row: ``[p (3), n (3), body velocity reference (3)]``
* baseline row: ``[position reference (3), cos(yaw/2), sin(yaw/2), 0,
  body velocity reference (3)]``
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .dynamics import VehicleParams, quat_to_rot
from .errors import DegenerateGeometryError, EmptyModelError, InvalidParameterError, InvalidSpecError
from .ocp import StageResidualSpec

REF_DIM = 9
MIN_NORMAL_XY = 0.1
HEADING_EPS = 1e-6

VT_NMPC = "vt_nmpc"
BASELINE_NMPC = "baseline_nmpc"
CONTROLLERS = (VT_NMPC, BASELINE_NMPC)


# --------------------------------------------------------------------------
# configuration types


@dataclass(frozen=True)
class VisualReferences:
    d_ref: float = 7.0
    r_ref: float | None = None
    h_ref: float = 1.0
    o_ref: float = 0.0

    def __post_init__(self):
        if not self.d_ref > 0:
            raise InvalidSpecError(f"d_ref must be positive, got {self.d_ref!r}")
        if self.r_ref is None:
            object.__setattr__(self, "r_ref", float(self.d_ref))
        if self.h_ref != 1.0 or self.o_ref != 0.0:
            raise InvalidSpecError("h_ref is fixed at 1 and o_ref at 0")


def _diag(values, size, name):
    arr = np.asarray(values, dtype=float)
    if arr.shape != (size,) or not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidSpecError(f"{name} must be {size} finite non-negative values")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class ControllerWeights:
    """VT-NMPC weights. ``W_Nc`` defaults to ``1.5 * W_xstar``."""

    w_h: float = 80.0
    w_d: float = 30.0
    w_r: float = 25.0
    w_o: float = 60.0
    W_xstar: tuple = (0.3, 0.3, 1.0, 80.0, 80.0)
    W_u: tuple = (1.0, 1.0, 0.25, 0.03)
    W_Nc: tuple | None = None

    def __post_init__(self):
        for name in ("w_h", "w_d", "w_r", "w_o"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidSpecError(f"{name} must be finite and non-negative")
        object.__setattr__(self, "W_xstar", _diag(self.W_xstar, 5, "W_xstar"))
        object.__setattr__(self, "W_u", _diag(self.W_u, 4, "W_u"))
        nc = tuple(1.5 * w for w in self.W_xstar) if self.W_Nc is None else self.W_Nc
        object.__setattr__(self, "W_Nc", _diag(nc, 5, "W_Nc"))


@dataclass(frozen=True)
class BaselineWeights:
    """Position + yaw NMPC weights; velocity, input and terminal weights match VT-NMPC."""

    W_pos: tuple = (30.0, 30.0, 30.0)
    w_yaw: float = 80.0
    W_xstar: tuple = (0.3, 0.3, 1.0, 80.0, 80.0)
    W_u: tuple = (1.0, 1.0, 0.25, 0.03)
    W_Nc: tuple | None = None

    def __post_init__(self):
        if not (math.isfinite(self.w_yaw) and self.w_yaw >= 0):
            raise InvalidSpecError("w_yaw must be finite and non-negative")
        object.__setattr__(self, "W_pos", _diag(self.W_pos, 3, "W_pos"))
        object.__setattr__(self, "W_xstar", _diag(self.W_xstar, 5, "W_xstar"))
        object.__setattr__(self, "W_u", _diag(self.W_u, 4, "W_u"))
        nc = tuple(1.5 * w for w in self.W_xstar) if self.W_Nc is None else self.W_Nc
        object.__setattr__(self, "W_Nc", _diag(nc, 5, "W_Nc"))


@dataclass(frozen=True)
class StageReference:
    p: np.ndarray
    n: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        n = np.asarray(self.n, dtype=float)
        if abs(math.hypot(n[0], n[1]) - 1.0) > 1e-9 or n[2] != 0.0:
            raise InvalidParameterError("stage normal must be a unit XY vector with zero z")

    def row(self) -> np.ndarray:
        return np.concatenate([self.p, self.n, self.velocity]).astype(float)


def planar_normal(normal) -> np.ndarray:
    """Project a surface normal onto XY and rescale it to unit length.

    Raises :class:`DegenerateGeometryError` when the horizontal part is
    shorter than 0.1, where the visual objective loses its meaning.
    """
    n = np.asarray(normal, dtype=float)
    length = math.hypot(n[0], n[1])
    if length < MIN_NORMAL_XY:
        raise DegenerateGeometryError(
            f"normal {n.tolist()} is too close to vertical (|n_xy| = {length:.3g} < {MIN_NORMAL_XY})"
        )
    return np.array([n[0] / length, n[1] / length, 0.0])


# --------------------------------------------------------------------------
# visual functions


def _split(state, p):
    x = np.asarray(state, dtype=float)
    a = np.asarray(p, dtype=float) - x[:3]
    return x, a


def heading_function(state, p) -> float:
    x, a = _split(state, p)
    axy = math.hypot(a[0], a[1])
    if axy <= HEADING_EPS:
        raise DegenerateGeometryError("drone is directly above or below the inspection point")
    fwd = quat_to_rot(np.ascontiguousarray(x[6:10]))[:, 0]
    fxy = math.hypot(fwd[0], fwd[1])
    if fxy <= HEADING_EPS:
        raise DegenerateGeometryError("body forward axis is vertical")
    return float((fwd[0] * a[0] + fwd[1] * a[1]) / (fxy * axy))


def distance_function(state, p) -> float:
    _, a = _split(state, p)
    return float(math.hypot(a[0], a[1]))


def roi_function(state, p, n) -> float:
    _, a = _split(state, p)
    nn = planar_normal(n)
    return float(-(a[0] * nn[0] + a[1] * nn[1]))


def orthogonality_function(state, p, n) -> float:
    _, a = _split(state, p)
    nn = planar_normal(n)
    return float(np.linalg.norm(a - (a @ nn) * nn))


def visual_series(positions, quaternions, points, normals):
    """Vectorised ``(h, d, r, o)`` for arrays of poses and references.

    ``h`` is NaN where the plan-view distance is at most 1e-6 m.
    ``normals`` must already be planar unit vectors.
    """
    pos = np.asarray(positions, dtype=float)
    q = np.asarray(quaternions, dtype=float)
    a = np.asarray(points, dtype=float) - pos
    n = np.asarray(normals, dtype=float)
    qx, qy, qz, qw = q.T
    fx = 1.0 - 2.0 * (qy * qy + qz * qz)
    fy = 2.0 * (qx * qy + qw * qz)
    d = np.hypot(a[:, 0], a[:, 1])
    fxy = np.hypot(fx, fy)
    with np.errstate(invalid="ignore", divide="ignore"):
        h = (fx * a[:, 0] + fy * a[:, 1]) / (fxy * d)
    h[(d <= HEADING_EPS) | (fxy <= HEADING_EPS)] = np.nan
    an = np.einsum("ij,ij->i", a, n)
    r = -an
    o = np.linalg.norm(a - an[:, None] * n, axis=1)
    return h, d, r, o


# --------------------------------------------------------------------------
# compiled residual kernels (unweighted)


@nb.njit(cache=True)
def _heading(x, px, py):
    ax = px - x[0]
    ay = py - x[1]
    qx, qy, qz, qw = x[6], x[7], x[8], x[9]
    fx = 1.0 - 2.0 * (qy * qy + qz * qz)
    fy = 2.0 * (qx * qy + qw * qz)
    den = max(math.sqrt(fx * fx + fy * fy), 1e-9) * max(math.sqrt(ax * ax + ay * ay), 1e-9)
    return (fx * ax + fy * ay) / den


@nb.njit(cache=True)
def vt_stage_residual(x, u, ref, prm):
    """VT-NMPC stage residual used by the solver (14 entries).

    The orthogonality term is split into its two Cartesian components
    (tangential plan-view offset and altitude offset). Their squared sum is
    ``o**2``, so the cost is unchanged while the residual stays smooth at
    ``o = 0``.
    """
    res = np.empty(14)
    ax = ref[0] - x[0]
    ay = ref[1] - x[1]
    az = ref[2] - x[2]
    nx, ny = ref[3], ref[4]
    res[0] = _heading(x, ref[0], ref[1]) - 1.0
    res[1] = math.sqrt(ax * ax + ay * ay) - prm[0]
    res[2] = -(ax * nx + ay * ny) - prm[1]
    res[3] = -ny * ax + nx * ay
    res[4] = az
    res[5] = x[3] - ref[6]
    res[6] = x[4] - ref[7]
    res[7] = x[5] - ref[8]
    res[8] = x[6]
    res[9] = x[7]
    res[10] = u[0]
    res[11] = u[1]
    res[12] = u[2]
    res[13] = u[3] - prm[2]
    return res


@nb.njit(cache=True)
def xstar_terminal_residual(x, ref, prm):
    res = np.empty(5)
    res[0] = x[3] - ref[6]
    res[1] = x[4] - ref[7]
    res[2] = x[5] - ref[8]
    res[3] = x[6]
    res[4] = x[7]
    return res


@nb.njit(cache=True)
def _yaw_error(x, c, s):
    # vector-z part of conj(q_ref) * q for a yaw-only reference, sign-fixed
    # so that q and -q give the same error
    qz, qw = x[8], x[9]
    sgn = 1.0 if c * qw + s * qz >= 0.0 else -1.0
    return 2.0 * (c * qz - s * qw) * sgn


@nb.njit(cache=True)
def baseline_stage_residual(x, u, ref, prm):
    res = np.empty(13)
    res[0] = x[0] - ref[0]
    res[1] = x[1] - ref[1]
    res[2] = x[2] - ref[2]
    res[3] = _yaw_error(x, ref[3], ref[4])
    res[4] = x[3] - ref[6]
    res[5] = x[4] - ref[7]
    res[6] = x[5] - ref[8]
    res[7] = x[6]
    res[8] = x[7]
    res[9] = u[0]
    res[10] = u[1]
    res[11] = u[2]
    res[12] = u[3] - prm[0]
    return res


# --------------------------------------------------------------------------
# weighted residuals (public, 13 entries each)


def vt_nmpc_residuals(state, control, ref: StageReference, weights: ControllerWeights = ControllerWeights(),
                      vrefs: VisualReferences = VisualReferences(), vehicle: VehicleParams = VehicleParams()):
    """Weighted VT-NMPC stage residual.

    ``[sqrt(w_h)(h-1), sqrt(w_d)(d-d_ref), sqrt(w_r)(r-r_ref), sqrt(w_o) o,
    sqrt(W_x*)(x*-x*_ref), sqrt(W_u)(u-u_ref)]`` with
    ``x* = [u, v, w, qx, qy]`` and ``u_ref = [0, 0, 0, m g]``.
    """
    x = np.asarray(state, dtype=float)
    u = np.asarray(control, dtype=float)
    h = heading_function(x, ref.p)
    d = distance_function(x, ref.p)
    r = roi_function(x, ref.p, ref.n)
    o = orthogonality_function(x, ref.p, ref.n)
    xs = np.concatenate([x[3:6] - ref.velocity, x[6:8]])
    du = u - np.array([0.0, 0.0, 0.0, vehicle.hover_thrust])
    visual = np.array([
        math.sqrt(weights.w_h) * (h - 1.0),
        math.sqrt(weights.w_d) * (d - vrefs.d_ref),
        math.sqrt(weights.w_r) * (r - vrefs.r_ref),
        math.sqrt(weights.w_o) * o,
    ])
    return np.concatenate([visual, np.sqrt(weights.W_xstar) * xs, np.sqrt(weights.W_u) * du])


def baseline_reference(p, n, d_ref: float) -> tuple[np.ndarray, float]:
    """Stand-off position ``p + d_ref n`` and the yaw facing the surface, in (-pi, pi]."""
    nn = planar_normal(n)
    # 0.0 - n_y is never -0.0, so a surface facing +x gives pi rather than -pi
    return np.asarray(p, dtype=float) + d_ref * nn, math.atan2(0.0 - nn[1], -nn[0])


def baseline_nmpc_residuals(state, control, position_ref, yaw_ref: float, velocity_ref=(0.0, 0.0, 0.0),
                            weights: BaselineWeights = BaselineWeights(),
                            vehicle: VehicleParams = VehicleParams()):
    """Weighted baseline residual: position, yaw, x* and control errors (13 entries)."""
    row = np.zeros(REF_DIM)
    row[:3] = position_ref
    row[3], row[4] = math.cos(0.5 * yaw_ref), math.sin(0.5 * yaw_ref)
    row[6:9] = velocity_ref
    res = baseline_stage_residual(np.asarray(state, dtype=float), np.asarray(control, dtype=float),
                                  row, np.array([vehicle.hover_thrust]))
    return np.sqrt(baseline_stage_weights(weights)) * res


# --------------------------------------------------------------------------
# solver objective builders


def vt_stage_weights(w: ControllerWeights) -> np.ndarray:
    return np.array([w.w_h, w.w_d, w.w_r, w.w_o, w.w_o, *w.W_xstar, *w.W_u])


def baseline_stage_weights(w: BaselineWeights) -> np.ndarray:
    return np.array([*w.W_pos, w.w_yaw, *w.W_xstar, *w.W_u])


def vt_objective(weights: ControllerWeights = ControllerWeights(), vrefs: VisualReferences = VisualReferences(),
                 vehicle: VehicleParams = VehicleParams()) -> StageResidualSpec:
    return StageResidualSpec(
        vt_stage_residual, xstar_terminal_residual,
        vt_stage_weights(weights), np.array(weights.W_Nc),
        np.array([vrefs.d_ref, vrefs.r_ref, vehicle.hover_thrust]), REF_DIM,
    )


def baseline_objective(weights: BaselineWeights = BaselineWeights(),
                       vehicle: VehicleParams = VehicleParams()) -> StageResidualSpec:
    return StageResidualSpec(
        baseline_stage_residual, xstar_terminal_residual,
        baseline_stage_weights(weights), np.array(weights.W_Nc),
        np.array([vehicle.hover_thrust]), REF_DIM,
    )


# --------------------------------------------------------------------------
# reference generation


def _wrap(angle):
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


class ReferencePath:
    """Time-parameterised inspection reference built from plan points.

    Consecutive points are joined by straight segments in ``p``; the planar
    normal angle is interpolated linearly along each segment (the shorter
    way round). A segment's length is
    ``sqrt(|dp|**2 + (d_ref * dpsi)**2)``, the distance travelled by the
    stand-off point, so the progression speed is respected while orbiting
    to a new face as well as while sweeping one. Arc length is
    ``speed * t`` and clamps at the final point.
    """

    def __init__(self, points, d_ref: float, speed: float):
        pts = list(points)
        if not pts:
            raise EmptyModelError("cannot build references from an empty plan")
        if not speed > 0:
            raise InvalidParameterError(f"progression speed must be positive, got {speed!r}")
        if not d_ref > 0:
            raise InvalidParameterError(f"d_ref must be positive, got {d_ref!r}")
        self.d_ref = float(d_ref)
        self.speed = float(speed)
        self.p = np.array([pt.position for pt in pts], dtype=float)
        normals = np.array([planar_normal(pt.normal) for pt in pts])
        self.cluster_ids = np.array([pt.cluster_id for pt in pts])
        self.phases = np.array([getattr(pt, "phase", 1) for pt in pts])
        psi = np.arctan2(normals[:, 1], normals[:, 0])
        dpsi = np.array([_wrap(b - a) for a, b in zip(psi[:-1], psi[1:])])
        self.psi = np.concatenate([psi[:1], psi[0] + np.cumsum(dpsi)])
        seg = np.sqrt(np.sum(np.diff(self.p, axis=0) ** 2, axis=1) + (self.d_ref * dpsi) ** 2)
        self.s = np.concatenate([[0.0], np.cumsum(seg)])
        same = (self.cluster_ids[:-1] == self.cluster_ids[1:]) & (self.phases[:-1] == self.phases[1:])
        # labels of segment i (and of the final point): transits belong to
        # the phase they lead into and to no cluster
        self.on_sweep = np.concatenate([same, [True]])
        self.segment_phase = np.concatenate([self.phases[1:], self.phases[-1:]])
        self.segment_cluster = np.concatenate([np.where(same, self.cluster_ids[:-1], -1), self.cluster_ids[-1:]])

    @property
    def length(self) -> float:
        return float(self.s[-1])

    @property
    def duration(self) -> float:
        return self.length / self.speed

    def active_index(self, t) -> np.ndarray:
        """Index of the segment (or final point) active at time ``t``."""
        s = np.minimum(self.speed * np.asarray(t, dtype=float), self.s[-1])
        idx = np.searchsorted(self.s, s, side="right") - 1
        return np.clip(idx, 0, len(self.s) - 1)

    def sample(self, t):
        """Points, planar normals and inertial stand-off velocities at times ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s_raw = self.speed * t
        s = np.minimum(s_raw, self.s[-1])
        i = np.minimum(np.searchsorted(self.s, s, side="right") - 1, len(self.s) - 2)
        if len(self.s) == 1:
            p = np.repeat(self.p, len(t), axis=0)
            psi = np.repeat(self.psi, len(t))
            vel = np.zeros((len(t), 3))
        else:
            i = np.maximum(i, 0)
            L = self.s[i + 1] - self.s[i]
            safe = np.where(L > 0, L, 1.0)
            f = np.where(L > 0, (s - self.s[i]) / safe, 1.0)
            dp = self.p[i + 1] - self.p[i]
            dpsi = self.psi[i + 1] - self.psi[i]
            p = self.p[i] + f[:, None] * dp
            psi = self.psi[i] + f * dpsi
            rate = np.where((L > 0) & (s_raw < self.s[-1]), self.speed / safe, 0.0)
            tang = np.stack([-np.sin(psi), np.cos(psi), np.zeros_like(psi)], axis=1)
            vel = rate[:, None] * (dp + self.d_ref * dpsi[:, None] * tang)
        n = np.stack([np.cos(psi), np.sin(psi), np.zeros_like(psi)], axis=1)
        return p, n, vel

    def labels(self, t):
        """``(phase, cluster_id, on_sweep)`` arrays for times ``t``; transits have cluster -1."""
        i = self.active_index(t)
        return self.segment_phase[i], self.segment_cluster[i], self.on_sweep[i]


def stage_times(t: float, horizon: int, dt: float) -> np.ndarray:
    return t + dt * np.arange(horizon + 1)


def generate_references(path: ReferencePath, t: float, state, horizon: int = 30, dt: float = 0.01,
                        controller: str = VT_NMPC) -> np.ndarray:
    """Reference rows for stages ``0..horizon`` (terminal included) at time ``t``.

    Stage ``k`` receives the plan sample at arc length
    ``speed * (t + k dt)``. Inertial stand-off velocities are rotated into
    the body frame of ``state``. VT-NMPC rows hold ``(p, n, v_body)`` and
    never a drone position; baseline rows hold the stand-off position and
    the facing yaw as a half-angle pair.
    """
    p, n, vel = path.sample(stage_times(t, horizon, dt))
    R = quat_to_rot(np.ascontiguousarray(np.asarray(state, dtype=float)[6:10]))
    rows = np.zeros((horizon + 1, REF_DIM))
    rows[:, 6:9] = vel @ R
    if controller == VT_NMPC:
        rows[:, 0:3] = p
        rows[:, 3:6] = n
    elif controller == BASELINE_NMPC:
        rows[:, 0:3] = p + path.d_ref * n
        yaw = np.arctan2(-n[:, 1], -n[:, 0])
        rows[:, 3] = np.cos(0.5 * yaw)
        rows[:, 4] = np.sin(0.5 * yaw)
    else:
        raise InvalidParameterError(f"unknown controller {controller!r}; expected one of {CONTROLLERS}")
    return rows


def stage_references(path: ReferencePath, t: float, state, horizon: int = 30, dt: float = 0.01):
    """The VT-NMPC references as :class:`StageReference` objects."""
    rows = generate_references(path, t, state, horizon, dt, VT_NMPC)
    return [StageReference(r[0:3].copy(), r[3:6].copy(), r[6:9].copy()) for r in rows]


def make_objective(controller: str, vehicle: VehicleParams = VehicleParams(),
                   vrefs: VisualReferences = VisualReferences(),
                   vt_weights: ControllerWeights = ControllerWeights(),
                   baseline_weights: BaselineWeights = BaselineWeights()) -> StageResidualSpec:
    if controller == VT_NMPC:
        return vt_objective(vt_weights, vrefs, vehicle)
    if controller == BASELINE_NMPC:
        return baseline_objective(baseline_weights, vehicle)
    raise InvalidParameterError(f"unknown controller {controller!r}; expected one of {CONTROLLERS}")


__all__ = [
    "BASELINE_NMPC", "BaselineWeights", "CONTROLLERS", "ControllerWeights", "ReferencePath",
    "StageReference", "VT_NMPC", "VisualReferences", "baseline_nmpc_residuals", "baseline_reference",
    "distance_function", "generate_references", "heading_function", "make_objective",
    "orthogonality_function", "planar_normal", "roi_function", "stage_references", "visual_series",
    "vt_nmpc_residuals",
]
