"""Local HTTP service exposing the pipeline to scripts and the planner UI.

Jobs run asynchronously in threads, each in its own working directory keyed
by job id, so concurrent jobs never interleave outputs. The service keeps no
state across restarts beyond those directories.
"""

from __future__ import annotations

import io
import os
import threading
import uuid
from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import FileResponse, PlainTextResponse, Response
from PIL import Image
from pydantic import BaseModel

from .config import PipelineConfig
from .errors import StentfitError
from .pipeline import STAGES, run_pipeline
from .volume import load_mask, load_volume

_STAGE_INDEX = {s: i for i, s in enumerate(STAGES + ("failed",))}


class JobRecord(BaseModel):
    id: str
    stage: str  # segmenting | skeletonizing | simulating | measuring | done | failed
    progress: float
    error: str | None = None
    config: PipelineConfig


class _Job:
    """Mutable job state; snapshot() produces a consistent JobRecord."""

    def __init__(self, job_id: str, cfg: PipelineConfig, workdir: str):
        self.lock = threading.Lock()
        self.record = JobRecord(id=job_id, stage="segmenting", progress=0.0,
                                config=cfg)
        self.workdir = workdir
        self.artifacts: dict[str, str] = {}

    def advance(self, stage: str, progress: float):
        with self.lock:
            if self.record.stage == "failed":
                return
            # transitions are forward-only
            if _STAGE_INDEX[stage] < _STAGE_INDEX[self.record.stage]:
                return
            self.record.stage = stage
            self.record.progress = max(self.record.progress, progress)

    def fail(self, detail: str):
        with self.lock:
            self.record.stage = "failed"
            self.record.error = detail

    def snapshot(self) -> JobRecord:
        with self.lock:
            return self.record.model_copy(deep=True)


def _mask_surface_obj(mask) -> str:
    """Exposed voxel faces of the mask as an OBJ-style quad mesh (mm)."""
    bits = mask.bits
    sp = np.asarray(mask.spacing)
    org = np.asarray(mask.origin)
    verts: dict[tuple, int] = {}
    lines_v: list[str] = []
    faces: list[tuple[int, int, int, int]] = []

    def vid(i, j, k):
        key = (i, j, k)
        n = verts.get(key)
        if n is None:
            n = len(verts) + 1
            verts[key] = n
            p = org + np.array([i, j, k]) * sp
            lines_v.append(f"v {p[0]:.6f} {p[1]:.6f} {p[2]:.6f}")
        return n

    padded = np.pad(bits, 1, constant_values=False)
    for axis in range(3):
        inner = np.swapaxes(padded, 0, axis)
        solid = np.swapaxes(bits, 0, axis)
        # local coordinates put `axis` first; swap back before emitting
        def to_orig(t, axis=axis):
            t = list(t)
            t[0], t[axis] = t[axis], t[0]
            return tuple(t)

        for sign in (-1, 1):
            nb = inner[:-2] if sign < 0 else inner[2:]
            for a, b, c in np.argwhere(solid & ~nb[:, 1:-1, 1:-1]):
                face_a = a + (1 if sign > 0 else 0)
                corners = [(face_a, b, c), (face_a, b + 1, c),
                           (face_a, b + 1, c + 1), (face_a, b, c + 1)]
                faces.append(tuple(vid(*to_orig(q)) for q in corners))
    lines_f = [f"f {a} {b} {c} {d}" for a, b, c, d in faces]
    return "\n".join(lines_v + lines_f) + "\n"


def create_app(workdir: str | None = None,
               volume_path: str | None = None) -> FastAPI:
    root = (workdir or os.environ.get("STENTFIT_WORKDIR")
            or os.path.join(os.getcwd(), "jobs"))
    os.makedirs(root, exist_ok=True)

    app = FastAPI(title="stentfit pipeline service")
    jobs: dict[str, _Job] = {}
    jobs_lock = threading.Lock()
    volume = load_volume(volume_path) if volume_path else None

    def _get(job_id: str) -> _Job:
        with jobs_lock:
            job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job id")
        return job

    def _run(job: _Job, cfg: PipelineConfig):
        try:
            result = run_pipeline(cfg, job.workdir, progress=job.advance)
            job.artifacts = result.artifacts
            job.advance("done", 1.0)
        except (StentfitError, OSError, ValueError) as exc:
            job.fail(f"{type(exc).__name__}: {exc}")

    @app.post("/jobs", response_model=JobRecord)
    def create_job(cfg: PipelineConfig):
        job_id = uuid.uuid4().hex[:12]
        jobdir = os.path.join(root, job_id)
        os.makedirs(jobdir)
        cfg.save(os.path.join(jobdir, "config.json"))
        job = _Job(job_id, cfg, jobdir)
        with jobs_lock:
            jobs[job_id] = job
        threading.Thread(target=_run, args=(job, cfg), daemon=True).start()
        return job.snapshot()

    @app.get("/jobs/{job_id}", response_model=JobRecord)
    def get_job(job_id: str):
        return _get(job_id).snapshot()

    def _artifact(job: _Job, filename: str) -> str:
        path = os.path.join(job.workdir, filename)
        if not os.path.exists(path):
            raise HTTPException(status_code=404,
                                detail=f"{filename} not available yet")
        return path

    @app.get("/jobs/{job_id}/mesh")
    def get_mesh(job_id: str,
                 which: Literal["initial", "final"] = Query("final")):
        job = _get(job_id)
        return FileResponse(_artifact(job, f"mesh_{which}.txt"),
                            media_type="text/plain")

    @app.get("/jobs/{job_id}/report")
    def get_report(job_id: str):
        job = _get(job_id)
        return FileResponse(_artifact(job, "report.json"),
                            media_type="application/json")

    @app.get("/jobs/{job_id}/trace")
    def get_trace(job_id: str):
        job = _get(job_id)
        return FileResponse(_artifact(job, "trace.csv"), media_type="text/csv")

    @app.get("/jobs/{job_id}/surface", response_class=PlainTextResponse)
    def get_surface(job_id: str):
        job = _get(job_id)
        mask = load_mask(_artifact(job, "mask.svh"))
        return _mask_surface_obj(mask)

    @app.get("/volume/slice")
    def volume_slice(axis: int = Query(ge=0, le=2), index: int = Query(ge=0),
                     window: float | None = None, level: float | None = None):
        if volume is None:
            raise HTTPException(status_code=404, detail="no volume configured")
        if index >= volume.dims[axis]:
            raise HTTPException(status_code=404, detail="slice index out of range")
        plane = np.take(volume.data, index, axis=axis)
        data = np.asarray(volume.data)
        if window is None:
            window = float(data.max() - data.min()) or 1.0
        if level is None:
            level = float(data.min()) + window / 2.0
        lo = level - window / 2.0
        img8 = np.clip((plane - lo) / window * 255.0, 0.0, 255.0)
        image = Image.fromarray(img8.T.astype(np.uint8), mode="L")
        buf = io.BytesIO()
        image.save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    return app
