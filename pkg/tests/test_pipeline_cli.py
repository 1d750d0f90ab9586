"""CLI subcommands, exit codes, and the shared staged pipeline."""

import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from stentfit.cli import cli
from stentfit.config import PipelineConfig
from stentfit.measure import MeasurementReport
from stentfit.pipeline import STAGES, run_pipeline

from conftest import frozen_pipeline_config


@pytest.fixture()
def runner():
    return CliRunner()


def _write_phantom_cfg(path):
    cfg = {
        "dims": [48, 48, 48],
        "spacing": [1.0, 1.0, 1.0],
        "axis_xy": [24.5, 24.5],
        "phantom": {
            "trunk_radius": 8.0, "trunk_length": 30.0,
            "aneurysm_peak_radius": 8.0, "aneurysm_center": 15.0,
            "aneurysm_width": 5.0, "distal_neck_radius": 8.0,
            "limb_radius": 1.0, "limb_length": 0.0, "limb_half_angle": 0.0,
        },
    }
    path.write_text(json.dumps(cfg))


def test_phantom_and_segment_commands(runner, tmp_path):
    spec = tmp_path / "phantom.cfg"
    _write_phantom_cfg(spec)
    out = str(tmp_path / "vol")
    res = runner.invoke(cli, ["phantom", "--spec", str(spec), "--out", out])
    assert res.exit_code == 0, res.output
    assert os.path.exists(out + ".svh") and os.path.exists(out + ".svr")
    assert os.path.exists(out + "_truth.json")

    mask_out = str(tmp_path / "mask")
    res = runner.invoke(cli, ["segment", "--volume", out,
                              "--seed", "24.5", "24.5", "24.0",
                              "--lower", "50", "--upper", "150",
                              "--out", mask_out])
    assert res.exit_code == 0, res.output
    assert os.path.exists(mask_out + ".svh")


def test_unknown_subcommand_is_usage_error(runner):
    res = runner.invoke(cli, ["frobnicate"])
    assert res.exit_code == 2


def test_missing_required_option_is_usage_error(runner):
    res = runner.invoke(cli, ["segment", "--volume", "x"])
    assert res.exit_code == 2


def test_domain_error_exits_one(runner, tmp_path):
    spec = tmp_path / "phantom.cfg"
    _write_phantom_cfg(spec)
    out = str(tmp_path / "vol")
    runner.invoke(cli, ["phantom", "--spec", str(spec), "--out", out])
    # seed lands in background tissue: domain error, not usage
    res = runner.invoke(cli, ["segment", "--volume", out,
                              "--seed", "2.0", "2.0", "2.0",
                              "--lower", "50", "--upper", "150",
                              "--out", str(tmp_path / "m")])
    assert res.exit_code == 1
    assert "Error" in res.output
    # missing volume file
    res = runner.invoke(cli, ["segment", "--volume", str(tmp_path / "nope"),
                              "--seed", "1", "1", "1",
                              "--lower", "0", "--upper", "1",
                              "--out", str(tmp_path / "m")])
    assert res.exit_code == 1


def test_run_pipeline_stages_and_artifacts(aaa_volume_on_disk, tmp_path):
    cfg = PipelineConfig.model_validate(
        frozen_pipeline_config(aaa_volume_on_disk + ".svh"))
    seen = []
    result = run_pipeline(cfg, tmp_path / "work",
                          progress=lambda st, fr: seen.append((st, fr)))
    stages = [s for s, _ in seen]
    assert stages == list(STAGES)
    fractions = [f for _, f in seen]
    assert fractions == sorted(fractions)
    for name in ("mask", "centerlines", "mesh_initial", "mesh_final",
                 "mesh_final_json", "trace", "report"):
        assert name in result.artifacts
        assert os.path.exists(result.artifacts[name])
    truth = json.loads(
        open(aaa_volume_on_disk + "_truth.json").read())["diameters"]
    rep = result.report
    for key in "abcdef":
        tol = max(1.0, 0.05 * truth[key])
        assert abs(getattr(rep, key) - truth[key]) <= tol, key


def test_full_pipeline_command(runner, aaa_volume_on_disk, tmp_path):
    cfg_path = tmp_path / "full.cfg"
    cfg_path.write_text(json.dumps(
        frozen_pipeline_config(aaa_volume_on_disk + ".svh")))
    workdir = tmp_path / "out"
    res = runner.invoke(cli, ["pipeline", "--config", str(cfg_path),
                              "--workdir", str(workdir)])
    assert res.exit_code == 0, res.output
    report = MeasurementReport.from_dict(
        json.loads((workdir / "report.json").read_text()))
    truth = json.loads(
        open(aaa_volume_on_disk + "_truth.json").read())["diameters"]
    for key in "abcdef":
        tol = max(1.0, 0.05 * truth[key])
        assert abs(getattr(report, key) - truth[key]) <= tol, key
    # every staged artifact landed in the workdir
    for name in ("mask.svh", "mask.svr", "centerlines.json",
                 "mesh_initial.txt", "mesh_final.txt", "mesh_final.json",
                 "trace.csv", "report.json"):
        assert (workdir / name).exists(), name


def test_simulate_and_measure_commands(runner, aaa_volume_on_disk, tmp_path):
    cfg_path = tmp_path / "full.cfg"
    cfg = frozen_pipeline_config(aaa_volume_on_disk + ".svh")
    cfg["solver"]["max_iterations"] = 60  # speed over accuracy here
    cfg_path.write_text(json.dumps(cfg))

    mask_out = str(tmp_path / "mask")
    res = runner.invoke(cli, ["segment", "--volume", aaa_volume_on_disk,
                              "--seed", "32.5", "32.5", "75.0",
                              "--lower", "50", "--upper", "150",
                              "--out", mask_out])
    assert res.exit_code == 0, res.output
    cl_path = str(tmp_path / "cl.json")
    res = runner.invoke(cli, ["skeleton", "--mask", mask_out,
                              "--out", cl_path])
    assert res.exit_code == 0, res.output
    out_dir = str(tmp_path / "sim")
    res = runner.invoke(cli, ["simulate", "--config", str(cfg_path),
                              "--mask", mask_out, "--centerlines", cl_path,
                              "--out", out_dir])
    assert res.exit_code == 0, res.output
    res = runner.invoke(cli, [
        "measure", "--mesh", os.path.join(out_dir, "mesh_final.json"),
        "--centerlines", cl_path,
        "--proximal-site", "1.0", "--aneurysm-region", "3", "19",
        "--distal-neck-region", "20", "24",
        "--out", str(tmp_path / "report.json")])
    assert res.exit_code == 0, res.output
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["c"] >= rep["a"] and rep["c"] >= rep["d"]


def test_pipeline_without_landmarks_skips_report(aaa_volume_on_disk, tmp_path):
    d = frozen_pipeline_config(aaa_volume_on_disk + ".svh")
    d.pop("landmarks")
    d["solver"]["max_iterations"] = 5
    cfg = PipelineConfig.model_validate(d)
    result = run_pipeline(cfg, tmp_path / "work")
    assert result.report is None
    assert "report" not in result.artifacts
    assert os.path.exists(result.artifacts["mesh_final"])
