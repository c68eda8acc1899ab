from __future__ import annotations

import json

import numpy as np
import pytest
import yaml

from windinspect.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_PLANNING, EXIT_SOLVER, main
from windinspect.config import FULL_SCALE, LAB_SCALE, GlobalConfig, dump_config, from_dict, load_config, preset
from windinspect.errors import ConfigError


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


def test_presets():
    full = preset(FULL_SCALE)
    assert full.visual.d_ref == 7.0 and full.safety_margin == 1.0 and full.wind.mean_speed == 4.0
    lab = preset(LAB_SCALE)
    assert lab.visual.d_ref == 0.5 and lab.safety_margin == 0.1
    assert lab.turbine.blade_length == pytest.approx(50.0 / 15.0)
    assert lab.turbine.blade_width == pytest.approx(0.3)
    assert lab.turbine.blades == 1
    with pytest.raises(ConfigError):
        preset("moon-scale")


def test_round_trip_through_yaml():
    cfg = from_dict({"wind": {"mean_speed": 7.0}, "scenario": {"controller": "baseline_nmpc", "seed": 3}})
    again = from_dict(yaml.safe_load(dump_config(cfg)))
    assert again == cfg
    assert again.scenario.wind.mean_speed == 7.0 and again.scenario.seed == 3


def test_overrides_layer_on_preset():
    cfg = from_dict({"preset": LAB_SCALE, "visual": {"d_ref": 0.6}})
    assert cfg.scenario.visual.d_ref == 0.6
    assert cfg.scenario.safety_margin == 0.1


@pytest.mark.parametrize("data", [
    {"bogus": 1},
    {"wind": {"gust": 3}},
    {"scenario": {"colour": "red"}},
    {"wind": "fast"},
    {"visual": {"d_ref": -1.0}},
    {"scenario": {"safety_margin": 9.0}},
    {"output_dir": ""},
    [1, 2, 3],
])
def test_bad_configs(data):
    with pytest.raises(ConfigError):
        from_dict(data)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("wind: [unclosed", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(bad)
    assert isinstance(load_config(None), GlobalConfig)


def test_cli_mesh(tmp_path, capsys):
    assert main(["mesh", "--subdivisions", "1", "--out", str(tmp_path)]) == EXIT_OK
    faces = [ln for ln in (tmp_path / "mesh.obj").read_text().splitlines() if ln.startswith("f ")]
    assert len(faces) == 36
    summary = json.loads((tmp_path / "mesh_summary.json").read_text())
    assert summary["clusters"] == 12
    assert (tmp_path / "config.yaml").exists()
    assert "36 triangles" in capsys.readouterr().out


def test_cli_plan(tmp_path, capsys):
    assert main(["plan", "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "total tour length: 741.371125 m" in out
    rows = (tmp_path / "plan.csv").read_text().splitlines()
    assert rows[0] == "phase,cluster_id,x,y,z,nx,ny,nz"
    assert {r.split(",")[0] for r in rows[1:]} == {"1", "2"}


def test_cli_plan_start_override(tmp_path):
    assert main(["plan", "--start", "0", "40", "100", "--out", str(tmp_path)]) == EXIT_OK
    summary = json.loads((tmp_path / "plan_summary.json").read_text())
    assert summary["phases"][0]["cluster_order"][0] in range(12)
    cfg = yaml.safe_load((tmp_path / "config.yaml").read_text())
    assert cfg["scenario"]["start"] == [0.0, 40.0, 100.0]


def test_cli_simulate(tmp_path, capsys):
    code = main(["simulate", "--controller", "baseline_nmpc", "--wind", "4", "--duration", "1",
                 "--seed", "5", "--out", str(tmp_path)])
    assert code == EXIT_OK
    log_lines = (tmp_path / "log.csv").read_text().splitlines()
    assert len(log_lines) == 101
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["controller"] == "baseline_nmpc" and report["seed"] == 5 and report["status"] == "ok"
    assert set(report["metrics"]) >= {"coverage", "sm", "cm_mean", "d_mean"}
    plot = (tmp_path / "plot_data.csv").read_text().splitlines()
    assert plot[0] == "t,d,cm" and len(plot) == 101
    assert "baseline_nmpc: coverage" in capsys.readouterr().out


def test_cli_compare(tmp_path, capsys):
    code = main(["compare", "--wind", "0", "--duration", "0.5", "--out", str(tmp_path)])
    assert code == EXIT_OK
    data = json.loads((tmp_path / "comparison.json").read_text())
    assert [r["controller"] for r in data["rows"]] == ["vt_nmpc", "baseline_nmpc"]
    assert (tmp_path / "plot_vt_nmpc.csv").exists() and (tmp_path / "plot_baseline_nmpc.csv").exists()
    assert "coverage %" in (tmp_path / "comparison.txt").read_text()


def test_cli_compare_needs_two(tmp_path):
    assert main(["compare", "--controllers", "vt_nmpc", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_cli_config_error(tmp_path):
    cfg = write_yaml(tmp_path / "c.yaml", {"wind": {"gust": 1}})
    assert main(["mesh", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["mesh", "--subdivisions", "0", "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_cli_bad_wind_value(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--wind", "breezy"])
    assert exc.value.code == 2


def test_cli_planning_error(tmp_path):
    # a blade lying horizontal has faces looking straight up and down
    cfg = write_yaml(tmp_path / "c.yaml", {"turbine": {"assembly_rotation": 90.0}})
    code = main(["simulate", "--config", str(cfg), "--duration", "0.1", "--out", str(tmp_path / "o")])
    assert code == EXIT_PLANNING


def test_cli_solver_error(tmp_path):
    cfg = write_yaml(tmp_path / "c.yaml", {"wind": {"mean_speed": 1.0e306, "sinusoid_std": 0.0}})
    with np.errstate(all="ignore"):
        code = main(["simulate", "--config", str(cfg), "--duration", "0.5", "--out", str(tmp_path / "o")])
    assert code == EXIT_SOLVER
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["status"] == "aborted"


def test_cli_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["mesh", "--out", str(blocker / "sub")]) == EXIT_IO


def test_cli_config_file_and_preset(tmp_path):
    cfg = write_yaml(tmp_path / "c.yaml", {"preset": LAB_SCALE, "output_dir": str(tmp_path / "lab")})
    assert main(["mesh", "--config", str(cfg)]) == EXIT_OK
    echo = yaml.safe_load((tmp_path / "lab" / "config.yaml").read_text())
    assert echo["preset"] == LAB_SCALE and echo["visual"]["d_ref"] == 0.5
