"""Safety, coverage and centering metrics over trajectory logs.

All functions accept any object with the array attributes of
:class:`windinspect.simulator.TrajectoryLog` (``t``, ``states``, ``d``,
``h``, ``phase``, ``on_sweep``), so synthetic logs work in tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numba as nb
import numpy as np

from .errors import EmptyModelError, InvalidParameterError, InvalidSpecError
from .geometry import TriMesh


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera looking along body +x, body +z up.

    ``max_range`` of ``None`` means three times the reference distance,
    resolved by :meth:`resolved`.
    """

    horizontal_fov_deg: float = 90.0
    vertical_fov_deg: float = 65.0
    max_range: float | None = None
    backface_culling: bool = True

    def __post_init__(self):
        for name in ("horizontal_fov_deg", "vertical_fov_deg"):
            v = getattr(self, name)
            if not 0.0 < v < 180.0:
                raise InvalidSpecError(f"{name} must lie in (0, 180), got {v!r}")
        if self.max_range is not None and not self.max_range > 0:
            raise InvalidSpecError(f"max_range must be positive, got {self.max_range!r}")

    def resolved(self, d_ref: float) -> CameraModel:
        if self.max_range is not None:
            return self
        return CameraModel(self.horizontal_fov_deg, self.vertical_fov_deg, 3.0 * d_ref, self.backface_culling)


@dataclass(frozen=True)
class MetricsReport:
    """Evaluation of one run. Percentages in [0, 100]; distances in m.

    The ``*_sweep`` fields repeat the statistics over on-surface sweep
    records only (transits between surfaces excluded).
    """

    coverage: float
    sm: float
    cm_mean: float
    cm_min: float
    d_mean: float
    d_min: float
    d_max: float
    sm_sweep: float
    cm_mean_sweep: float
    d_mean_sweep: float
    d_min_sweep: float
    d_max_sweep: float
    degenerate_records: int
    records: int
    d_ref: float
    safety_margin: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _nonempty(log):
    d = np.asarray(log.d, dtype=float)
    if d.size == 0:
        raise EmptyModelError("trajectory log has no records")
    return d


def safety_metric(log, d_ref: float, margin: float, mask=None) -> float:
    """Share of records with ``|d - d_ref| < margin``, in percent."""
    if not margin > 0:
        raise InvalidParameterError(f"safety margin must be positive, got {margin!r}")
    d = _nonempty(log)
    if mask is not None:
        d = d[np.asarray(mask, dtype=bool)]
        if d.size == 0:
            return float("nan")
    return float(100.0 * np.mean(np.abs(d - d_ref) < margin))


def centering_metric(log, mask=None) -> tuple[float, float, int]:
    """``(mean, min, degenerate_count)`` of the heading function ``h``.

    Records where ``h`` is undefined (NaN, the drone directly above or below
    the inspection point) are excluded and counted.
    """
    h = np.asarray(log.h, dtype=float)
    if mask is not None:
        h = h[np.asarray(mask, dtype=bool)]
    bad = ~np.isfinite(h)
    good = h[~bad]
    if good.size == 0:
        return float("nan"), float("nan"), int(bad.sum())
    return float(good.mean()), float(good.min()), int(bad.sum())


def distance_stats(log, mask=None) -> tuple[float, float, float]:
    d = _nonempty(log)
    if mask is not None:
        d = d[np.asarray(mask, dtype=bool)]
        if d.size == 0:
            return float("nan"), float("nan"), float("nan")
    return float(d.mean()), float(d.min()), float(d.max())


@nb.njit(cache=True)
def _visible_kernel(positions, quats, vertices, normals, centroids, candidates,
                    tan_h, tan_v, max_range, cull, seen):
    M = positions.shape[0]
    T = vertices.shape[0]
    r2 = max_range * max_range
    for m in range(M):
        px, py, pz = positions[m, 0], positions[m, 1], positions[m, 2]
        qx, qy, qz, qw = quats[m, 0], quats[m, 1], quats[m, 2], quats[m, 3]
        # rows of R^T: body axes in inertial coordinates
        fx = 1.0 - 2.0 * (qy * qy + qz * qz)
        fy = 2.0 * (qx * qy + qw * qz)
        fz = 2.0 * (qx * qz - qw * qy)
        lx = 2.0 * (qx * qy - qw * qz)
        ly = 1.0 - 2.0 * (qx * qx + qz * qz)
        lz = 2.0 * (qy * qz + qw * qx)
        ux = 2.0 * (qx * qz + qw * qy)
        uy = 2.0 * (qy * qz - qw * qx)
        uz = 1.0 - 2.0 * (qx * qx + qy * qy)
        for t in range(T):
            if seen[t] or not candidates[t]:
                continue
            cx = centroids[t, 0] - px
            cy = centroids[t, 1] - py
            cz = centroids[t, 2] - pz
            if cull and normals[t, 0] * cx + normals[t, 1] * cy + normals[t, 2] * cz >= 0.0:
                continue
            ok = True
            for v in range(3):
                dx = vertices[t, v, 0] - px
                dy = vertices[t, v, 1] - py
                dz = vertices[t, v, 2] - pz
                if dx * dx + dy * dy + dz * dz > r2:
                    ok = False
                    break
                depth = fx * dx + fy * dy + fz * dz
                if depth <= 0.0:
                    ok = False
                    break
                side = lx * dx + ly * dy + lz * dz
                up = ux * dx + uy * dy + uz * dz
                if abs(side) > tan_h * depth or abs(up) > tan_v * depth:
                    ok = False
                    break
            if ok:
                seen[t] = True


def viewed_triangles(positions, quaternions, mesh: TriMesh, camera: CameraModel, seen=None) -> np.ndarray:
    """Boolean mask of long-face triangles seen from any of the given poses.

    A triangle counts when all three vertices are in front of the camera,
    inside both half-angles of the field of view and within range, and the
    triangle faces the camera. ``camera.max_range`` must be resolved.
    """
    if len(mesh) == 0:
        raise EmptyModelError("mesh has no triangles")
    if camera.max_range is None:
        raise InvalidParameterError("camera range is unresolved; call CameraModel.resolved(d_ref)")
    out = np.zeros(len(mesh), dtype=bool) if seen is None else seen
    _visible_kernel(
        np.ascontiguousarray(positions, dtype=float).reshape(-1, 3),
        np.ascontiguousarray(quaternions, dtype=float).reshape(-1, 4),
        np.ascontiguousarray(mesh.vertices), np.ascontiguousarray(mesh.normals),
        np.ascontiguousarray(mesh.centroids), mesh.long_face_mask,
        math.tan(math.radians(0.5 * camera.horizontal_fov_deg)),
        math.tan(math.radians(0.5 * camera.vertical_fov_deg)),
        float(camera.max_range), bool(camera.backface_culling), out,
    )
    return out


def coverage(log, mesh, camera: CameraModel) -> float:
    """Percentage of long-face triangles viewed at least once.

    ``mesh`` is a single :class:`TriMesh` or a mapping ``phase -> TriMesh``
    of index-aligned meshes (the rotor turned between phases); records are
    checked against the mesh of their phase and the union is scored.
    """
    meshes = mesh if isinstance(mesh, dict) else None
    first = next(iter(meshes.values())) if meshes else mesh
    if first is None or len(first) == 0:
        raise EmptyModelError("mesh has no triangles")
    long_mask = first.long_face_mask
    if not long_mask.any():
        raise EmptyModelError("mesh has no long-face triangles")
    states = np.asarray(log.states, dtype=float)
    seen = np.zeros(len(first), dtype=bool)
    if meshes is None:
        viewed_triangles(states[:, 0:3], states[:, 6:10], first, camera, seen)
    else:
        phases = np.asarray(log.phase)
        for ph, m in sorted(meshes.items()):
            sel = phases == ph
            if sel.any():
                viewed_triangles(states[sel, 0:3], states[sel, 6:10], m, camera, seen)
    return float(100.0 * seen[long_mask].sum() / long_mask.sum())


def evaluate(log, mesh, camera: CameraModel, d_ref: float, margin: float) -> MetricsReport:
    cam = camera.resolved(d_ref)
    sweep = np.asarray(log.on_sweep, dtype=bool)
    cm_mean, cm_min, degenerate = centering_metric(log)
    d_mean, d_min, d_max = distance_stats(log)
    ds_mean, ds_min, ds_max = distance_stats(log, sweep)
    return MetricsReport(
        coverage=coverage(log, mesh, cam),
        sm=safety_metric(log, d_ref, margin),
        cm_mean=cm_mean,
        cm_min=cm_min,
        d_mean=d_mean,
        d_min=d_min,
        d_max=d_max,
        sm_sweep=safety_metric(log, d_ref, margin, sweep),
        cm_mean_sweep=centering_metric(log, sweep)[0],
        d_mean_sweep=ds_mean,
        d_min_sweep=ds_min,
        d_max_sweep=ds_max,
        degenerate_records=degenerate,
        records=int(len(log.d)),
        d_ref=float(d_ref),
        safety_margin=float(margin),
    )
