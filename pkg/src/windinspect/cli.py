"""Command-line interface: ``windinspect {mesh,plan,simulate,compare}``.

Exit codes: 0 success, 2 configuration error, 3 planning error, 4 solver
instability or numeric fault, 5 file I/O error. Set ``WINDINSPECT_LOG``
(e.g. ``DEBUG``) to change log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import PRESETS, GlobalConfig, dump_config, load_config
from .controllers import CONTROLLERS
from .errors import (ConfigError, DegenerateGeometryError, EmptyModelError, InvalidParameterError, InvalidSpecError,
                     MalformedGraphError, MeshIOError, NumericFault)
from .geometry import export_mesh, generate_turbine_mesh
from .planner import cluster_surfaces, export_plan
from .simulator import STATUS_OK, evaluate_log, run_comparison, run_scenario, scenario_plan

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PLANNING = 3
EXIT_SOLVER = 4
EXIT_IO = 5

log = logging.getLogger("windinspect")


class SolverInstability(RuntimeError):
    pass


def _wind(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"wind must be a number in m/s, got {text!r}") from None
    if not np.isfinite(value):
        raise argparse.ArgumentTypeError("wind must be finite")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML configuration file")
    common.add_argument("--out", type=Path, help="output directory (default: config output_dir)")
    common.add_argument("--seed", type=int, help="seed recorded with the run")
    common.add_argument("--preset", choices=PRESETS, help="scenario preset to start from")

    parser = argparse.ArgumentParser(prog="windinspect", description="Wind-turbine blade inspection pipeline.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", parents=[common], help="generate the turbine mesh")
    p.add_argument("--subdivisions", type=int, help="panels along each blade face")

    p = sub.add_parser("plan", parents=[common], help="plan the inspection tour")
    p.add_argument("--spacing", type=float, help="inspection point spacing in m")
    p.add_argument("--start", type=float, nargs=3, metavar=("X", "Y", "Z"), help="tour start position")

    for name, helptext in (("simulate", "run one closed-loop inspection"),
                           ("compare", "compare controllers on one scenario")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--wind", type=_wind, help="mean wind speed in m/s (0, 4, 7 or any value)")
        p.add_argument("--duration", type=float, help="cap on simulated time in s")
        if name == "simulate":
            p.add_argument("--controller", choices=CONTROLLERS, help="controller to fly")
        else:
            p.add_argument("--controllers", nargs="+", choices=CONTROLLERS, default=list(CONTROLLERS),
                           help="controllers to compare (at least two entries)")
    return parser


def _effective_config(args) -> tuple[GlobalConfig, Path]:
    cfg = load_config(args.config, args.preset)
    scen = cfg.scenario
    try:
        if args.seed is not None:
            scen = replace(scen, seed=args.seed)
        if getattr(args, "subdivisions", None) is not None:
            scen = replace(scen, turbine=replace(scen.turbine, face_subdivisions=args.subdivisions))
        if getattr(args, "spacing", None) is not None:
            scen = replace(scen, spacing=args.spacing)
        if getattr(args, "start", None) is not None:
            scen = replace(scen, start=tuple(args.start))
        if getattr(args, "wind", None) is not None:
            scen = replace(scen, wind=replace(scen.wind, mean_speed=args.wind))
        if getattr(args, "duration", None) is not None:
            scen = replace(scen, duration=args.duration)
        if getattr(args, "controller", None) is not None:
            scen = replace(scen, controller=args.controller)
    except (InvalidSpecError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid command-line override: {exc}") from exc
    out = Path(args.out) if args.out is not None else Path(cfg.output_dir)
    cfg = GlobalConfig(scen, str(out))
    return cfg, out


def _prepare_out(out: Path, cfg: GlobalConfig) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.yaml").write_text(dump_config(cfg), encoding="utf-8")
    except OSError as exc:
        raise MeshIOError(f"cannot write to output directory {str(out)!r}: {exc}") from exc


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise MeshIOError(f"cannot write {str(path)!r}: {exc}") from exc


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_plain) + "\n"


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _plot_csv(run_log) -> str:
    lines = ["t,d,cm"]
    for t, d, h in zip(run_log.t.tolist(), run_log.d.tolist(), run_log.h.tolist()):
        lines.append(f"{t!r},{d!r},{h!r}")
    return "\n".join(lines) + "\n"


def cmd_mesh(cfg: GlobalConfig, out: Path) -> int:
    mesh = generate_turbine_mesh(cfg.scenario.turbine)
    export_mesh(mesh, out / "mesh.obj")
    summary = mesh.summary()
    summary["clusters"] = len(cluster_surfaces(mesh))
    _write(out / "mesh_summary.json", _dumps(summary))
    print(f"mesh: {summary['triangles']} triangles, {summary['clusters']} surfaces -> {out / 'mesh.obj'}")
    return EXIT_OK


def cmd_plan(cfg: GlobalConfig, out: Path) -> int:
    plan = scenario_plan(cfg.scenario)
    export_plan(plan.points, out / "plan.csv")
    summary = {
        "total_tour_length": plan.tour_length,
        "points": len(plan.points),
        "phases": [
            {"phase": ph.phase, "cluster_order": ph.tour.cluster_order, "tour_length": ph.tour.total_length,
             "points": len(ph.points)}
            for ph in plan.phases
        ],
    }
    _write(out / "plan_summary.json", _dumps(summary))
    for ph in plan.phases:
        print(f"phase {ph.phase}: clusters {ph.tour.cluster_order}, tour length {ph.tour.total_length:.6f} m")
    print(f"total tour length: {plan.tour_length:.6f} m")
    return EXIT_OK


def cmd_simulate(cfg: GlobalConfig, out: Path) -> int:
    scen = cfg.scenario
    started = time.perf_counter()
    run_log = run_scenario(scen)
    log.info("simulated %d steps in %.1f s (median solve %.3f ms)", len(run_log),
             time.perf_counter() - started, 1e3 * float(np.median(run_log.solve_time)) if len(run_log) else 0.0)
    run_log.export_csv(out / "log.csv")
    _write(out / "plot_data.csv", _plot_csv(run_log))
    report = {"controller": scen.controller, "status": run_log.status, "fault": run_log.fault,
              "seed": scen.seed, "preset": scen.preset}
    if len(run_log):
        report["metrics"] = evaluate_log(run_log, scen).to_dict()
    _write(out / "report.json", _dumps(report))
    if "metrics" in report:
        m = report["metrics"]
        print(f"{scen.controller}: coverage {m['coverage']:.1f}%  SM {m['sm']:.1f}%  CM {m['cm_mean']:.4f}  "
              f"d mean {m['d_mean']:.3f} m  (d_ref {m['d_ref']} m, margin {m['safety_margin']} m)")
    if run_log.status != STATUS_OK:
        raise SolverInstability(f"run {run_log.status}: {run_log.fault or 'too many degraded solver steps'}")
    return EXIT_OK


def cmd_compare(cfg: GlobalConfig, out: Path, controllers) -> int:
    result = run_comparison(cfg.scenario, controllers)
    _write(out / "comparison.json", result.to_json() + "\n")
    _write(out / "comparison.txt", result.table() + "\n")
    for name, run_log in result.logs.items():
        _write(out / f"plot_{name}.csv", _plot_csv(run_log))
    print(result.table())
    bad = [name for name, run_log in result.logs.items() if run_log.status != STATUS_OK]
    if bad:
        raise SolverInstability(f"unstable runs: {', '.join(bad)}")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("WINDINSPECT_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg, out = _effective_config(args)
        if args.command == "compare" and len(args.controllers) < 2:
            raise ConfigError("compare needs at least two --controllers entries")
        _prepare_out(out, cfg)
        if args.command == "mesh":
            return cmd_mesh(cfg, out)
        if args.command == "plan":
            return cmd_plan(cfg, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out)
        return cmd_compare(cfg, out, args.controllers)
    except (ConfigError, InvalidSpecError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EmptyModelError, MalformedGraphError, DegenerateGeometryError, InvalidParameterError) as exc:
        print(f"planning error: {exc}", file=sys.stderr)
        return EXIT_PLANNING
    except (SolverInstability, NumericFault) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (MeshIOError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
