"""Build the V100 turbine mesh, group its faces and plan the two-phase tour.

Run with ``python3 demos/plan_v100.py [--spacing 2.0] [--csv plan.csv]``.
"""

from __future__ import annotations

import argparse

from windinspect.geometry import TurbineSpec, generate_turbine_mesh
from windinspect.planner import cluster_surfaces, export_plan, plan_inspection


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--spacing", type=float, default=2.0, help="inspection point spacing in m")
    parser.add_argument("--csv", help="optional path for the plan CSV")
    args = parser.parse_args()

    spec = TurbineSpec()
    mesh = generate_turbine_mesh(spec)
    print(f"mesh: {len(mesh)} triangles, hub at {spec.hub.tolist()}")
    for c in cluster_surfaces(mesh):
        print(f"  surface {c.cluster_id:2d}  blade {c.blade_id}  face {c.face_id}  "
              f"normal {c.mean_normal.round(3).tolist()}  length {c.length:.2f} m")

    plan = plan_inspection(spec, spacing=args.spacing)
    for phase in plan.phases:
        print(f"phase {phase.phase}: order {phase.tour.cluster_order}, "
              f"{len(phase.points)} points, tour {phase.tour.total_length:.3f} m")
    print(f"total tour length {plan.tour_length:.3f} m")
    if args.csv:
        export_plan(plan.points, args.csv)
        print(f"wrote {args.csv}")


if __name__ == "__main__":
    main()
