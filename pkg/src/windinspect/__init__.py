"""Automated wind-turbine blade inspection: mesh, tour planning, VT-NMPC and metrics."""

from __future__ import annotations

__version__ = "0.1.0"

from .controllers import (BASELINE_NMPC, VT_NMPC, BaselineWeights, ControllerWeights, ReferencePath,
                          StageReference, VisualReferences, baseline_nmpc_residuals, distance_function,
                          generate_references, heading_function, orthogonality_function, roi_function,
                          vt_nmpc_residuals)
from .dynamics import VehicleParams, WindModel, integrate_step, state_derivative, wind_accel
from .errors import (ConfigError, DegenerateGeometryError, EmptyModelError, InvalidParameterError,
                     InvalidSpecError, MalformedGraphError, MeshIOError, NumericFault, WindInspectError)
from .geometry import TriMesh, TurbineSpec, export_mesh, generate_turbine_mesh, import_mesh, rotate_mesh
from .metrics import CameraModel, MetricsReport, centering_metric, coverage, distance_stats, safety_metric
from .ocp import OcpSolution, RtiSolver, SolverConfig, StageResidualSpec, rti_step, shift_warm_start
from .planner import InspectionPoint, cluster_surfaces, interpolate_path, plan_inspection, solve_tour
from .simulator import ScenarioConfig, TrajectoryLog, run_comparison, run_scenario
