"""Blade-surface inspection planning.

Three steps: group mesh triangles into blade surfaces, order the surfaces
with an exact shortest open tour that sweeps each surface end to end, and
interpolate on-surface inspection points along each sweep.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyModelError, InvalidParameterError, MalformedGraphError, MeshIOError
from .geometry import CAP_FACE_ID, TriMesh, TurbineSpec, generate_turbine_mesh

ROOT, TIP = "root", "tip"
NORMAL_TOLERANCE_DEG = 1.0
MAX_TOUR_CLUSTERS = 16


@dataclass(frozen=True)
class SurfaceCluster:
    cluster_id: int
    blade_id: int
    face_id: int
    triangle_ids: np.ndarray  # ordered by centroid z
    mean_normal: np.ndarray
    root_node: np.ndarray
    tip_node: np.ndarray

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.tip_node - self.root_node))


@dataclass(frozen=True)
class TourNode:
    node_id: int
    position: np.ndarray
    cluster_id: int
    end_label: str


@dataclass(frozen=True)
class Tour:
    nodes: tuple[TourNode, ...]
    total_length: float

    @property
    def cluster_order(self) -> list[int]:
        return [n.cluster_id for n in self.nodes[::2]]


@dataclass(frozen=True)
class InspectionPoint:
    position: np.ndarray
    normal: np.ndarray
    cluster_id: int
    phase: int = 1


@dataclass
class PhasePlan:
    phase: int
    spec: TurbineSpec
    mesh: TriMesh
    clusters: list[SurfaceCluster]
    tour: Tour
    points: list[InspectionPoint]


@dataclass
class InspectionPlan:
    phases: list[PhasePlan] = field(default_factory=list)

    @property
    def points(self) -> list[InspectionPoint]:
        return [p for ph in self.phases for p in ph.points]

    @property
    def tour_length(self) -> float:
        return float(sum(ph.tour.total_length for ph in self.phases))

    def mesh_for_phase(self) -> dict[int, TriMesh]:
        return {ph.phase: ph.mesh for ph in self.phases}


# --------------------------------------------------------------------------
# clustering


def _line_extremes(mesh: TriMesh, ids: np.ndarray):
    """Fit a line through the member triangles and return its two end points.

    The axis comes from the de-duplicated corner grid, which is symmetric
    about the face centre line; the ends are the outermost centroid
    projections onto that axis.
    """
    corners = np.unique(np.round(mesh.vertices[ids].reshape(-1, 3), 9), axis=0)
    centre = corners.mean(axis=0)
    _, _, vt = np.linalg.svd(corners - centre, full_matrices=False)
    axis = vt[0]
    t = (mesh.centroids[ids] - centre) @ axis
    return centre + t.min() * axis, centre + t.max() * axis


def cluster_surfaces(mesh: TriMesh) -> list[SurfaceCluster]:
    """Group long-face triangles into planar blade surfaces.

    Triangles join a cluster when they share its blade and their normal is
    within one degree of the cluster's first normal. Cluster ids are
    ``4 * blade_id + face_id`` so they stay stable when the rotor turns.
    """
    long_ids = np.flatnonzero(mesh.face_id != CAP_FACE_ID)
    if len(long_ids) == 0:
        raise EmptyModelError("mesh has no long-face triangles to plan over")
    cos_tol = math.cos(math.radians(NORMAL_TOLERANCE_DEG))
    groups: list[tuple[int, np.ndarray, list[int]]] = []
    for i in long_ids:
        blade, n = int(mesh.blade_id[i]), mesh.normals[i]
        for b, ref, members in groups:
            if b == blade and float(ref @ n) >= cos_tol:
                members.append(int(i))
                break
        else:
            groups.append((blade, n, [int(i)]))

    clusters = []
    for blade, _, members in groups:
        ids = np.array(members)
        faces = np.unique(mesh.face_id[ids])
        if len(faces) != 1:
            raise EmptyModelError(f"surface on blade {blade} mixes faces {faces.tolist()}")
        ids = ids[np.argsort(mesh.centroids[ids, 2], kind="stable")]
        mean_n = mesh.normals[ids].mean(axis=0)
        mean_n /= np.linalg.norm(mean_n)
        a, b = _line_extremes(mesh, ids)
        if mesh.hub is not None:
            hub = np.asarray(mesh.hub)
            root, tip = (a, b) if np.linalg.norm(a - hub) <= np.linalg.norm(b - hub) else (b, a)
        else:
            root, tip = (a, b) if a[2] <= b[2] else (b, a)
        face = int(faces[0])
        clusters.append(SurfaceCluster(4 * blade + face, blade, face, ids, mean_n, root, tip))
    clusters.sort(key=lambda c: c.cluster_id)
    return clusters


def tour_nodes(clusters) -> list[TourNode]:
    """Two nodes per cluster; node id ``2 * cluster_id`` is the root, ``+1`` the tip."""
    nodes = []
    for c in clusters:
        nodes.append(TourNode(2 * c.cluster_id, c.root_node, c.cluster_id, ROOT))
        nodes.append(TourNode(2 * c.cluster_id + 1, c.tip_node, c.cluster_id, TIP))
    return nodes


# --------------------------------------------------------------------------
# ordering


def _pair_up(nodes) -> tuple[list[int], np.ndarray, np.ndarray]:
    if len(nodes) == 0 or len(nodes) % 2:
        raise MalformedGraphError(f"tour needs node pairs, got {len(nodes)} nodes")
    by_cluster: dict[int, dict[str, TourNode]] = {}
    for n in nodes:
        ends = by_cluster.setdefault(n.cluster_id, {})
        if n.end_label not in (ROOT, TIP) or n.end_label in ends:
            raise MalformedGraphError(f"cluster {n.cluster_id} has a bad or repeated {n.end_label!r} node")
        ends[n.end_label] = n
    for cid, ends in by_cluster.items():
        if len(ends) != 2:
            raise MalformedGraphError(f"cluster {cid} is missing its pair node")
    cids = sorted(by_cluster)
    if len(cids) > MAX_TOUR_CLUSTERS:
        raise MalformedGraphError(f"at most {MAX_TOUR_CLUSTERS} clusters are supported, got {len(cids)}")
    pos = np.array([[by_cluster[c][ROOT].position, by_cluster[c][TIP].position] for c in cids], dtype=float)
    ids = np.array([[by_cluster[c][ROOT].node_id, by_cluster[c][TIP].node_id] for c in cids])
    return cids, pos, ids


def solve_tour(nodes, start_position) -> Tour:
    """Shortest open tour over cluster node pairs.

    The tour starts at the node nearest ``start_position``, visits both nodes
    of every cluster back to back (either direction) and each cluster once.
    Solved exactly by dynamic programming over (visited set, last cluster,
    exit end). Among equal-length optima the lexicographically smallest
    node-id sequence wins.
    """
    cids, pos, ids = _pair_up(list(nodes))
    by_key = {(n.cluster_id, n.end_label): n for n in nodes}
    K = len(cids)
    start = np.asarray(start_position, dtype=float).reshape(3)

    flat_d = np.linalg.norm(pos.reshape(-1, 3) - start, axis=1)
    best = flat_d.min()
    cand = np.flatnonzero(flat_d <= best + 1e-12 * max(1.0, best))
    s = cand[np.argmin(ids.reshape(-1)[cand])]
    c0, e0 = divmod(int(s), 2)

    pair = np.linalg.norm(pos[:, 0] - pos[:, 1], axis=1)
    # D[c, o, c2, e2]: from end o of cluster c to end e2 of cluster c2
    D = np.linalg.norm(pos[:, :, None, None, :] - pos[None, None, :, :, :], axis=-1)
    # entering c2 at end 1 - o2 means leaving it at o2
    D_exit = D[:, :, :, ::-1]
    full = (1 << K) - 1
    f = np.full((1 << K, K, 2), np.inf)
    f[full] = 0.0
    bits = 1 << np.arange(K)
    for mask in range(full - 1, -1, -1):
        rem = np.flatnonzero((mask & bits) == 0)
        val = pair[rem, None] + f[mask | bits[rem], rem, :]
        f[mask] = (D_exit[:, :, rem, :] + val[None, None]).min(axis=(2, 3))

    total = pair[c0] + f[bits[c0], c0, 1 - e0]
    tol = 1e-9 * max(1.0, total)
    order = [(c0, e0)]
    mask, c, o = int(bits[c0]), c0, 1 - e0
    while mask != full:
        rem = np.flatnonzero((mask & bits) == 0)
        val = D_exit[c, o, rem, :] + pair[rem, None] + f[mask | bits[rem], rem, :]
        best = val.min()
        ties = np.argwhere(val <= best + tol)
        entry_ids = [ids[rem[i], 1 - j] for i, j in ties]
        i, j = ties[int(np.argmin(entry_ids))]
        c2, o2 = int(rem[i]), int(j)
        order.append((c2, 1 - o2))
        mask |= int(bits[c2])
        c, o = c2, o2

    labels = (ROOT, TIP)
    seq = []
    for ci, entry in order:
        seq.append(by_key[(cids[ci], labels[entry])])
        seq.append(by_key[(cids[ci], labels[1 - entry])])
    return Tour(tuple(seq), tour_length([n.position for n in seq]))


def tour_length(positions) -> float:
    p = np.asarray(positions, dtype=float)
    return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())


# --------------------------------------------------------------------------
# interpolation


def interpolate_path(tour: Tour, clusters, spacing: float = 2.0, phase: int = 1) -> list[InspectionPoint]:
    """Evenly spaced points from each cluster's entry node to its exit node.

    A segment of length ``L`` gets ``ceil(L / spacing) + 1`` points, both ends
    included, so the actual spacing never exceeds ``spacing``. Each point
    carries its cluster's mean normal. Transitions between clusters emit
    nothing.
    """
    if not spacing > 0:
        raise InvalidParameterError(f"spacing must be positive, got {spacing!r}")
    normals = {c.cluster_id: c.mean_normal for c in clusters}
    points = []
    for entry, exit_ in zip(tour.nodes[::2], tour.nodes[1::2]):
        a, b = entry.position, exit_.position
        length = float(np.linalg.norm(b - a))
        count = max(2, math.ceil(length / spacing - 1e-9) + 1)
        for frac in np.linspace(0.0, 1.0, count):
            points.append(InspectionPoint(a + frac * (b - a), normals[entry.cluster_id].copy(), entry.cluster_id, phase))
    return points


# --------------------------------------------------------------------------
# full plan


def default_start(spec: TurbineSpec) -> np.ndarray:
    """7 m in front of the tower base (along the rotor axis), 2 m above ground."""
    hub = spec.hub
    return np.array([hub[0] + 7.0, hub[1], 2.0])


def plan_phase(spec: TurbineSpec, start_position, spacing=2.0, phase=1, keep=None) -> PhasePlan:
    mesh = generate_turbine_mesh(spec)
    clusters = cluster_surfaces(mesh)
    if keep is not None:
        clusters = [c for c in clusters if c.cluster_id in keep]
        if not clusters:
            raise EmptyModelError("no clusters left to plan in this phase")
    tour = solve_tour(tour_nodes(clusters), start_position)
    return PhasePlan(phase, spec, mesh, clusters, tour, interpolate_path(tour, clusters, spacing, phase))


def plan_inspection(spec: TurbineSpec, spacing: float = 2.0, start_position=None,
                    rotation_deg: float = 120.0) -> InspectionPlan:
    """Two-phase plan: the full rotor, then the faces that pointed down.

    Phase 2 turns the assembly by ``rotation_deg`` and re-plans only the
    downward-facing surfaces of phase 1, starting from where phase 1 ended.
    Phase 2 is omitted when phase 1 has no downward-facing surface.
    """
    start = default_start(spec) if start_position is None else np.asarray(start_position, dtype=float)
    first = plan_phase(spec, start, spacing, phase=1)
    plan = InspectionPlan([first])
    downward = {c.cluster_id for c in first.clusters if c.mean_normal[2] < -1e-6}
    if downward:
        second = plan_phase(spec.rotated(rotation_deg), first.tour.nodes[-1].position, spacing,
                            phase=2, keep=downward)
        plan.phases.append(second)
    return plan


def export_plan(points, path) -> None:
    """Write inspection points as CSV: phase, cluster_id, x, y, z, nx, ny, nz."""
    try:
        with open(path, "w", newline="", encoding="ascii") as fh:
            w = csv.writer(fh)
            w.writerow(["phase", "cluster_id", "x", "y", "z", "nx", "ny", "nz"])
            for p in points:
                w.writerow([p.phase, p.cluster_id, *map(repr, map(float, p.position)), *map(repr, map(float, p.normal))])
    except OSError as exc:
        raise MeshIOError(f"cannot write plan to {os.fspath(path)!r}: {exc}") from exc


def import_plan(path) -> list[InspectionPoint]:
    try:
        with open(path, newline="", encoding="ascii") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise MeshIOError(f"cannot read plan from {os.fspath(path)!r}: {exc}") from exc
    return [
        InspectionPoint(
            np.array([float(r["x"]), float(r["y"]), float(r["z"])]),
            np.array([float(r["nx"]), float(r["ny"]), float(r["nz"])]),
            int(r["cluster_id"]),
            int(r["phase"]),
        )
        for r in rows
    ]
