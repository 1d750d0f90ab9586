"""HTTP service contract: jobs, artifacts, slices, CLI equivalence."""

import io
import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from stentfit.config import PipelineConfig
from stentfit.pipeline import run_pipeline
from stentfit.service import create_app

from conftest import frozen_pipeline_config


def _client(tmp_path, volume_path=None):
    app = create_app(workdir=str(tmp_path / "jobs"), volume_path=volume_path)
    return TestClient(app)


def _wait(client, job_id, timeout=120.0):
    t0 = time.time()
    while time.time() - t0 < timeout:
        rec = client.get(f"/jobs/{job_id}").json()
        if rec["stage"] in ("done", "failed"):
            return rec
        time.sleep(0.2)
    raise AssertionError("job did not finish in time")


def test_unknown_job_is_404(tmp_path):
    client = _client(tmp_path)
    assert client.get("/jobs/deadbeef").status_code == 404
    assert client.get("/jobs/deadbeef/report").status_code == 404


def test_invalid_config_is_422_naming_the_invariant(tmp_path,
                                                    aaa_volume_on_disk):
    client = _client(tmp_path)
    cfg = frozen_pipeline_config(aaa_volume_on_disk + ".svh")
    cfg["stent"] = {"r0_trunk": -1.0}
    res = client.post("/jobs", json=cfg)
    assert res.status_code == 422
    assert "RadiusNonPositive" in json.dumps(res.json())
    # unknown keys are rejected too
    cfg = frozen_pipeline_config(aaa_volume_on_disk + ".svh")
    cfg["surprise"] = True
    assert client.post("/jobs", json=cfg).status_code == 422


def test_job_lifecycle_and_artifacts(tmp_path, aaa_volume_on_disk):
    client = _client(tmp_path)
    cfg = frozen_pipeline_config(aaa_volume_on_disk + ".svh")
    res = client.post("/jobs", json=cfg)
    assert res.status_code == 200
    rec = res.json()
    job_id = rec["id"]
    # posted seed is echoed through the job record
    assert np.allclose(rec["config"]["seed"], cfg["seed"], atol=1e-6)

    final = _wait(client, job_id)
    assert final["stage"] == "done"
    assert final["progress"] == 1.0
    assert final["error"] is None

    report = client.get(f"/jobs/{job_id}/report")
    assert report.status_code == 200
    body = report.json()
    assert set("abcdef") <= set(body)

    for which in ("initial", "final"):
        mesh = client.get(f"/jobs/{job_id}/mesh", params={"which": which})
        assert mesh.status_code == 200
        assert mesh.text.startswith("v ")
    assert client.get(f"/jobs/{job_id}/mesh",
                      params={"which": "bogus"}).status_code == 422

    trace = client.get(f"/jobs/{job_id}/trace")
    assert trace.status_code == 200
    assert trace.text.splitlines()[0] == "iteration,E_int,E_ext,max_disp"

    surface = client.get(f"/jobs/{job_id}/surface")
    assert surface.status_code == 200
    assert surface.text.startswith("v ")


def test_service_equals_cli_byte_for_byte(tmp_path, aaa_volume_on_disk):
    cfg_dict = frozen_pipeline_config(aaa_volume_on_disk + ".svh")
    # CLI path
    cli_result = run_pipeline(PipelineConfig.model_validate(cfg_dict),
                              tmp_path / "cli_work")
    cli_report = open(cli_result.artifacts["report"], "rb").read()
    cli_mesh = open(cli_result.artifacts["mesh_final"], "rb").read()
    # service path
    client = _client(tmp_path)
    job_id = client.post("/jobs", json=cfg_dict).json()["id"]
    assert _wait(client, job_id)["stage"] == "done"
    assert client.get(f"/jobs/{job_id}/report").content == cli_report
    assert client.get(f"/jobs/{job_id}/mesh",
                      params={"which": "final"}).content == cli_mesh


def test_failed_job_reports_error_detail(tmp_path, aaa_volume_on_disk):
    client = _client(tmp_path)
    cfg = frozen_pipeline_config(aaa_volume_on_disk + ".svh")
    cfg["seed"] = [2.0, 2.0, 2.0]  # background tissue: segmentation fails
    job_id = client.post("/jobs", json=cfg).json()["id"]
    rec = _wait(client, job_id)
    assert rec["stage"] == "failed"
    assert "SeedOutsideWindow" in rec["error"]
    # no report artifact for a failed job
    assert client.get(f"/jobs/{job_id}/report").status_code == 404


def test_concurrent_jobs_are_isolated(tmp_path, aaa_volume_on_disk):
    client = _client(tmp_path)
    cfg = frozen_pipeline_config(aaa_volume_on_disk + ".svh")
    cfg["solver"]["max_iterations"] = 30
    ids = [client.post("/jobs", json=cfg).json()["id"] for _ in range(2)]
    assert ids[0] != ids[1]
    for job_id in ids:
        assert _wait(client, job_id)["stage"] == "done"
    meshes = [client.get(f"/jobs/{j}/mesh", params={"which": "final"}).content
              for j in ids]
    assert meshes[0] == meshes[1]  # same config, isolated but identical


def test_volume_slice_endpoint(tmp_path, aaa_volume_on_disk):
    client = _client(tmp_path, volume_path=aaa_volume_on_disk + ".svh")
    res = client.get("/volume/slice", params={"axis": 2, "index": 75})
    assert res.status_code == 200
    assert res.headers["content-type"] == "image/png"
    img = Image.open(io.BytesIO(res.content))
    assert img.size == (64, 64) and img.mode == "L"
    arr = np.asarray(img)
    assert arr.max() == 255 and arr.min() == 0  # lumen vs background

    # window/level rescaling: a narrow high window pushes everything to black
    res = client.get("/volume/slice", params={"axis": 2, "index": 75,
                                              "window": 10, "level": 500})
    arr = np.asarray(Image.open(io.BytesIO(res.content)))
    assert arr.max() == 0

    assert client.get("/volume/slice",
                      params={"axis": 2, "index": 96}).status_code == 404
    assert client.get("/volume/slice",
                      params={"axis": 5, "index": 0}).status_code == 422


def test_volume_slice_without_volume(tmp_path):
    client = _client(tmp_path)
    assert client.get("/volume/slice",
                      params={"axis": 0, "index": 0}).status_code == 404
