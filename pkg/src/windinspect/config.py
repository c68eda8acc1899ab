"""Scenario presets and YAML configuration files.

A configuration file is a YAML mapping with optional top-level keys
``preset``, ``output_dir`` and the sections below; every section maps
one-to-one onto a dataclass and unknown keys are rejected::

    preset: sim-full-scale
    turbine:   {tower_height, blade_length, blade_width, hub_position,
                assembly_rotation, face_subdivisions, blades}
    vehicle:   {mass, gravity}
    wind:      {mean_speed, sinusoid_period, sinusoid_std, direction, drag_gain}
    solver:    {horizon, stage_duration, rate_limit_deg, thrust_min_factor,
                thrust_max_factor, max_qp_iterations, qp_tolerance, regularization}
    visual:    {d_ref, r_ref}
    vt_weights:       {w_h, w_d, w_r, w_o, W_xstar, W_u, W_Nc}
    baseline_weights: {W_pos, w_yaw, W_xstar, W_u, W_Nc}
    camera:    {horizontal_fov_deg, vertical_fov_deg, max_range, backface_culling}
    scenario:  {controller, progression_speed, safety_margin, spacing, start,
                duration, settle_time, dt, rotation_deg, seed}

Values left out keep the preset's value.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields, replace

import yaml

from .controllers import BaselineWeights, ControllerWeights, VisualReferences
from .dynamics import VehicleParams, WindModel
from .errors import ConfigError, WindInspectError
from .geometry import TurbineSpec
from .metrics import CameraModel
from .ocp import SolverConfig
from .simulator import ScenarioConfig

FULL_SCALE = "sim-full-scale"
LAB_SCALE = "lab-small-scale"
PRESETS = (FULL_SCALE, LAB_SCALE)

# config section -> (ScenarioConfig attribute, dataclass)
SECTIONS = {
    "turbine": ("turbine", TurbineSpec),
    "vehicle": ("vehicle", VehicleParams),
    "wind": ("wind", WindModel),
    "solver": ("solver", SolverConfig),
    "visual": ("visual", VisualReferences),
    "vt_weights": ("vt_weights", ControllerWeights),
    "baseline_weights": ("baseline_weights", BaselineWeights),
    "camera": ("camera", CameraModel),
}
SCENARIO_KEYS = ("controller", "progression_speed", "safety_margin", "spacing", "start", "duration",
                 "settle_time", "dt", "rotation_deg", "seed")

# the lab blade: one blade scaled by 1/10 (thickness), 1/10 (width), 1/15 (length)
LAB_LENGTH_SCALE = 1.0 / 15.0


@dataclass(frozen=True)
class GlobalConfig:
    scenario: ScenarioConfig
    output_dir: str = "out"


def preset(name: str) -> ScenarioConfig:
    if name == FULL_SCALE:
        return ScenarioConfig(preset=FULL_SCALE, wind=WindModel(mean_speed=4.0))
    if name == LAB_SCALE:
        full = TurbineSpec()
        return ScenarioConfig(
            preset=LAB_SCALE,
            turbine=TurbineSpec(
                tower_height=1.0,
                blade_length=full.blade_length * LAB_LENGTH_SCALE,
                blade_width=full.blade_width / 10.0,
                face_subdivisions=full.face_subdivisions,
                blades=1,
            ),
            wind=WindModel(mean_speed=4.0),
            visual=VisualReferences(d_ref=0.5),
            safety_margin=0.1,
            spacing=2.0 * LAB_LENGTH_SCALE,
            progression_speed=0.2,
        )
    raise ConfigError(f"unknown preset {name!r}; expected one of {PRESETS}")


def _build(cls, base, values: dict, where: str):
    if not isinstance(values, dict):
        raise ConfigError(f"section {where!r} must be a mapping")
    names = {f.name for f in fields(cls) if f.init}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where!r}: {', '.join(unknown)}")
    clean = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    try:
        return replace(base, **clean)
    except (WindInspectError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where!r} section: {exc}") from exc


def from_dict(data: dict | None, preset_name: str | None = None) -> GlobalConfig:
    """Build a config from a parsed mapping layered over a preset.

    ``preset_name`` overrides the file's ``preset`` key.
    """
    data = {} if data is None else data
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping at the top level")
    allowed = {"preset", "output_dir", "scenario", *SECTIONS}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    name = preset_name or data.get("preset", FULL_SCALE)
    scen = preset(name)
    updates = {}
    for section, (attr, cls) in SECTIONS.items():
        if section in data:
            updates[attr] = _build(cls, getattr(scen, attr), data[section] or {}, section)
    scenario_values = data.get("scenario") or {}
    if not isinstance(scenario_values, dict):
        raise ConfigError("section 'scenario' must be a mapping")
    unknown = sorted(set(scenario_values) - set(SCENARIO_KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s) in 'scenario': {', '.join(unknown)}")
    updates.update(scenario_values)
    try:
        scen = replace(scen, **updates)
    except (WindInspectError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    out = data.get("output_dir", "out")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir must be a non-empty string")
    return GlobalConfig(scen, out)


def to_dict(config: GlobalConfig) -> dict:
    """Fully expanded mapping; ``from_dict(to_dict(c))`` reproduces ``c``."""
    scen = config.scenario
    data = {"preset": scen.preset, "output_dir": config.output_dir}
    for section, (attr, _) in SECTIONS.items():
        data[section] = _plain(dataclasses.asdict(getattr(scen, attr)))
    data["scenario"] = _plain({k: getattr(scen, k) for k in SCENARIO_KEYS})
    return data


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def load_config(path=None, preset_name: str | None = None) -> GlobalConfig:
    if path is None:
        return from_dict({}, preset_name)
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {os.fspath(path)!r}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {os.fspath(path)!r}: {exc}") from exc
    return from_dict(data, preset_name)


def dump_config(config: GlobalConfig) -> str:
    return yaml.safe_dump(to_dict(config), sort_keys=False, default_flow_style=None)
