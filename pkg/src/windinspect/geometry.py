"""Simplified wind-turbine blade meshes.

Each blade is a cuboid of ``blade_length x blade_width x blade_width / 3``
hanging off the hub in the rotor plane. The rotor axis is the inertial
x axis, so the rotor plane is y-z. Blade ``i`` sits at angle
``assembly_rotation + 120 * i`` degrees from vertical, measured as a
right-handed rotation about +x.

Blade-local frame: the blade axis is local +z (before tilting), the width
runs along local y and the thickness along local x.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidSpecError, MeshIOError

# face ids of the four long faces; end caps carry CAP_FACE_ID
FACE_FRONT = 0  # +x, broad
FACE_BACK = 1  # -x, broad
FACE_LEFT = 2  # +width, narrow
FACE_RIGHT = 3  # -width, narrow
CAP_FACE_ID = 4
LONG_FACES = (FACE_FRONT, FACE_BACK, FACE_LEFT, FACE_RIGHT)

ROTOR_AXIS = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class TurbineSpec:
    """Parametric description of the turbine blades.

    ``hub_position`` defaults to ``(0, 0, tower_height)``. ``blades`` is the
    number of blades actually meshed (1 for a single lab blade, 3 for a
    full rotor); blade ``i`` always keeps its nominal 120-degree slot.
    """

    tower_height: float = 120.0
    blade_length: float = 50.0
    blade_width: float = 3.0
    hub_position: tuple[float, float, float] | None = None
    assembly_rotation: float = 0.0
    face_subdivisions: int = 25
    blades: int = 3

    def __post_init__(self):
        for name in ("tower_height", "blade_length", "blade_width"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise InvalidSpecError(f"{name} must be positive, got {value!r}")
        if int(self.face_subdivisions) != self.face_subdivisions or self.face_subdivisions < 1:
            raise InvalidSpecError(
                f"face_subdivisions must be a positive integer, got {self.face_subdivisions!r}"
            )
        if self.blades not in (1, 2, 3):
            raise InvalidSpecError(f"blades must be 1, 2 or 3, got {self.blades!r}")
        if self.hub_position is not None:
            hub = tuple(float(v) for v in self.hub_position)
            if len(hub) != 3 or not np.all(np.isfinite(hub)):
                raise InvalidSpecError(f"hub_position must be a finite 3-vector, got {self.hub_position!r}")
            object.__setattr__(self, "hub_position", hub)

    @property
    def hub(self) -> np.ndarray:
        if self.hub_position is None:
            return np.array([0.0, 0.0, self.tower_height])
        return np.asarray(self.hub_position, dtype=float)

    @property
    def blade_thickness(self) -> float:
        return self.blade_width / 3.0

    def rotated(self, degrees: float) -> TurbineSpec:
        """Copy of this spec with the blade assembly turned further by ``degrees``."""
        return replace(self, assembly_rotation=self.assembly_rotation + degrees)


@dataclass(frozen=True)
class Triangle:
    vertices: np.ndarray
    normal: np.ndarray
    centroid: np.ndarray


@dataclass
class TriMesh:
    """Triangle soup with per-triangle blade and face labels.

    Attributes
    ----------
    vertices : (T, 3, 3) array, counter-clockwise about ``normals``.
    normals : (T, 3) outward unit normals.
    blade_id, face_id : (T,) integer labels.
    hub : rotor centre, when known; lets the planner tell blade roots from tips.
    """

    vertices: np.ndarray
    blade_id: np.ndarray
    face_id: np.ndarray
    hub: np.ndarray | None = None
    normals: np.ndarray = field(init=False)
    centroids: np.ndarray = field(init=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.blade_id = np.asarray(self.blade_id, dtype=int)
        self.face_id = np.asarray(self.face_id, dtype=int)
        if self.vertices.ndim != 3 or self.vertices.shape[1:] != (3, 3) or len(self.vertices) == 0:
            raise InvalidSpecError("mesh needs a non-empty (T, 3, 3) vertex array")
        if self.blade_id.shape != (len(self.vertices),) or self.face_id.shape != self.blade_id.shape:
            raise InvalidSpecError("blade_id and face_id need one entry per triangle")
        if np.any((self.blade_id < 0) | (self.blade_id > 2)):
            raise InvalidSpecError("blade_id must be in {0, 1, 2}")
        if np.any((self.face_id < 0) | (self.face_id > CAP_FACE_ID)):
            raise InvalidSpecError("face_id must be in {0..3} or the cap id")
        v = self.vertices
        cross = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        norm = np.linalg.norm(cross, axis=1)
        if np.any(norm <= 0):
            raise InvalidSpecError("mesh contains degenerate triangles")
        self.normals = cross / norm[:, None]
        self.centroids = v.mean(axis=1)

    def __len__(self) -> int:
        return len(self.vertices)

    def triangle(self, i: int) -> Triangle:
        return Triangle(self.vertices[i].copy(), self.normals[i].copy(), self.centroids[i].copy())

    @property
    def long_face_mask(self) -> np.ndarray:
        return self.face_id != CAP_FACE_ID

    @property
    def areas(self) -> np.ndarray:
        v = self.vertices
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)

    def summary(self) -> dict:
        long_faces = self.long_face_mask
        areas = self.areas
        per_blade = {
            int(b): float(areas[(self.blade_id == b) & long_faces].sum())
            for b in np.unique(self.blade_id)
        }
        return {
            "triangles": len(self),
            "long_face_triangles": int(long_faces.sum()),
            "blades": len(per_blade),
            "long_face_area_per_blade": per_blade,
        }


def rotation_about_axis(axis, degrees: float) -> np.ndarray:
    """Right-handed rotation matrix about a unit ``axis`` (Rodrigues)."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    theta = np.deg2rad(degrees)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(theta) * kx + (1.0 - np.cos(theta)) * kx @ kx


def _blade_frame(angle_deg: float):
    """Unit axis, width and thickness directions of a blade at ``angle_deg`` from vertical."""
    rot = rotation_about_axis(ROTOR_AXIS, angle_deg)
    axis = rot @ np.array([0.0, 0.0, 1.0])
    width = rot @ np.array([0.0, 1.0, 0.0])
    thickness = rot @ np.array([1.0, 0.0, 0.0])
    return axis, width, thickness


def _quad(a, b, c, d):
    """Split the quad loop a-b-c-d into two triangles with the loop's winding."""
    return [(a, b, c), (a, c, d)]


def _blade_triangles(spec: TurbineSpec, blade: int):
    axis, width, thick = _blade_frame(spec.assembly_rotation + 120.0 * blade)
    hub = spec.hub
    half_w = spec.blade_width / 2.0
    half_t = spec.blade_thickness / 2.0
    stations = np.linspace(0.0, spec.blade_length, spec.face_subdivisions + 1)

    # (face id, outward normal, in-face transverse direction, offset along normal, transverse half-size)
    # transverse direction chosen so that (axis, transverse, normal) is right-handed
    faces = [
        (FACE_FRONT, thick, np.cross(thick, axis), half_t, half_w),
        (FACE_BACK, -thick, np.cross(-thick, axis), half_t, half_w),
        (FACE_LEFT, width, np.cross(width, axis), half_w, half_t),
        (FACE_RIGHT, -width, np.cross(-width, axis), half_w, half_t),
    ]
    tris, face_ids = [], []
    for face_id, normal, trans, offset, half in faces:
        base = hub + offset * normal
        for s0, s1 in zip(stations[:-1], stations[1:]):
            c00 = base + s0 * axis - half * trans
            c10 = base + s0 * axis + half * trans
            c11 = base + s1 * axis + half * trans
            c01 = base + s1 * axis - half * trans
            # axis x trans == normal, so this loop is counter-clockwise about it
            for tri in _quad(c00, c01, c11, c10):
                tris.append(tri)
                face_ids.append(face_id)

    for s, normal in ((0.0, -axis), (spec.blade_length, axis)):
        centre = hub + s * axis
        corners = [
            centre - half_t * thick - half_w * width,
            centre + half_t * thick - half_w * width,
            centre + half_t * thick + half_w * width,
            centre - half_t * thick + half_w * width,
        ]
        # thick x width = axis; reverse the loop for the root cap
        if np.dot(np.cross(corners[1] - corners[0], corners[2] - corners[0]), normal) < 0:
            corners = corners[::-1]
        for tri in _quad(*corners):
            tris.append(tri)
            face_ids.append(CAP_FACE_ID)
    return tris, face_ids


def generate_turbine_mesh(spec: TurbineSpec) -> TriMesh:
    """Triangulate the blades of ``spec`` in the inverted-Y layout.

    Each long face gets ``2 * face_subdivisions`` right triangles; both end
    caps are meshed (two triangles each) and tagged with ``CAP_FACE_ID``.
    The tower and nacelle are not meshed.
    """
    if not isinstance(spec, TurbineSpec):
        raise InvalidSpecError(f"expected a TurbineSpec, got {type(spec).__name__}")
    verts, blade_ids, face_ids = [], [], []
    for blade in range(spec.blades):
        tris, faces = _blade_triangles(spec, blade)
        verts.extend(tris)
        face_ids.extend(faces)
        blade_ids.extend([blade] * len(tris))
    return TriMesh(np.array(verts, dtype=float), np.array(blade_ids), np.array(face_ids), hub=spec.hub)


def rotate_mesh(mesh: TriMesh, degrees: float, centre, axis=ROTOR_AXIS) -> TriMesh:
    """Rigidly rotate a mesh about ``axis`` through ``centre``."""
    rot = rotation_about_axis(axis, degrees)
    c = np.asarray(centre, dtype=float)
    verts = (mesh.vertices - c) @ rot.T + c
    hub = None if mesh.hub is None else (np.asarray(mesh.hub) - c) @ rot.T + c
    return TriMesh(verts, mesh.blade_id.copy(), mesh.face_id.copy(), hub=hub)


def export_mesh(mesh: TriMesh, path) -> None:
    """Write ``mesh`` as Wavefront OBJ.

    Vertices are written unshared (three per face) with ``repr`` precision so a
    re-import reproduces every coordinate bit for bit. Blade and face labels
    travel as ``g blade<b>_face<f>`` group lines.
    """
    if path is None or str(path) == "":
        raise MeshIOError("mesh export needs a non-empty path")
    lines = ["# windinspect turbine mesh", f"# triangles {len(mesh)}"]
    for v in mesh.vertices.reshape(-1, 3):
        lines.append(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}")
    group = None
    for i in range(len(mesh)):
        g = (int(mesh.blade_id[i]), int(mesh.face_id[i]))
        if g != group:
            lines.append(f"g blade{g[0]}_face{g[1]}")
            group = g
        a = 3 * i + 1
        lines.append(f"f {a} {a + 1} {a + 2}")
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise MeshIOError(f"cannot write mesh to {os.fspath(path)!r}: {exc}") from exc


def import_mesh(path) -> TriMesh:
    """Read a mesh written by :func:`export_mesh` (any triangle-only OBJ works)."""
    if path is None or str(path) == "":
        raise MeshIOError("mesh import needs a non-empty path")
    try:
        with open(path, encoding="ascii") as fh:
            text = fh.read()
    except OSError as exc:
        raise MeshIOError(f"cannot read mesh from {os.fspath(path)!r}: {exc}") from exc
    verts, faces, blades, face_ids = [], [], [], []
    blade, face = 0, 0
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "g":
                name = parts[1]
                b, f = name.split("_")
                blade, face = int(b[len("blade"):]), int(f[len("face"):])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                if len(idx) != 3:
                    raise ValueError("only triangles are supported")
                faces.append(idx)
                blades.append(blade)
                face_ids.append(face)
        except (ValueError, IndexError) as exc:
            raise MeshIOError(f"{os.fspath(path)}:{lineno}: malformed record {line!r}") from exc
    if not faces:
        raise MeshIOError(f"{os.fspath(path)!r} contains no faces")
    v = np.array(verts, dtype=float)
    return TriMesh(v[np.array(faces)], np.array(blades), np.array(face_ids))
