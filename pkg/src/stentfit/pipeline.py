"""Staged pipeline: volume -> mask -> centerlines -> simulated stent ->
measurement report. One code path shared by the CLI and the HTTP service so
both produce identical artifacts for identical configurations."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .config import PipelineConfig
from .distance import wall_field
from .measure import MeasurementReport, measure, ostium_coverage
from .segmentation import largest_component_cleanup, region_grow
from .skeleton import extract_centerlines, thin
from .solver import expansion_mode, run
from .stent import build_initial_stent, export_mesh, mesh_to_dict
from .volume import load_volume, save_mask

STAGES = ("segmenting", "skeletonizing", "simulating", "measuring", "done")


@dataclass(frozen=True)
class PipelineResult:
    workdir: str
    report: MeasurementReport | None
    artifacts: dict = field(default_factory=dict)  # name -> path


def _emit(progress, stage, fraction):
    if progress is not None:
        progress(stage, fraction)


def run_pipeline(cfg: PipelineConfig, workdir, progress=None) -> PipelineResult:
    """Execute every stage, writing artifacts into workdir.

    progress(stage, fraction) is called at each stage boundary with the
    stage that is starting and the completed fraction so far.
    """
    os.makedirs(workdir, exist_ok=True)
    artifacts = {}

    _emit(progress, "segmenting", 0.0)
    vol = load_volume(cfg.volume)
    mask = largest_component_cleanup(
        region_grow(vol, cfg.to_seed(), cfg.window.to_window()))
    artifacts["mask"] = save_mask(mask, os.path.join(workdir, "mask"))

    _emit(progress, "skeletonizing", 0.25)
    skel = thin(mask)
    cl = extract_centerlines(skel, mask,
                             prune_length=cfg.skeleton.prune_length,
                             sample_step=cfg.skeleton.sample_step)
    cl_path = os.path.join(workdir, "centerlines.json")
    cl.save(cl_path)
    artifacts["centerlines"] = cl_path

    _emit(progress, "simulating", 0.5)
    mesh = build_initial_stent(cl, cfg.stent.r0_trunk, cfg.stent.r0_limb,
                               cfg.stent.n_t, cfg.stent.trunk_rings,
                               cfg.stent.limb_rings)
    init_path = os.path.join(workdir, "mesh_initial.txt")
    export_mesh(mesh, init_path)
    artifacts["mesh_initial"] = init_path

    params = cfg.solver.to_params()
    if cfg.solver.mode == "measure":
        params = expansion_mode(params, cfg.solver.lumen_radius_hint)
    fld = wall_field(mask)
    deformed, trace = run(mesh, fld, params)

    final_path = os.path.join(workdir, "mesh_final.txt")
    export_mesh(deformed, final_path)
    artifacts["mesh_final"] = final_path
    final_json = os.path.join(workdir, "mesh_final.json")
    with open(final_json, "w") as fh:
        json.dump(mesh_to_dict(deformed), fh)
    artifacts["mesh_final_json"] = final_json
    trace_path = os.path.join(workdir, "trace.csv")
    trace.write_csv(trace_path)
    artifacts["trace"] = trace_path

    _emit(progress, "measuring", 0.75)
    report = None
    if cfg.landmarks is not None:
        covered = ()
        if cfg.markers:
            d_tol = float(np.linalg.norm(mask.spacing))
            covered = ostium_coverage(
                deformed, [m.to_marker() for m in cfg.markers], d_tol)
        report = measure(deformed, cl, cfg.landmarks.to_landmarks(),
                         covered_ostia=covered)
        report_path = os.path.join(workdir, "report.json")
        report.save(report_path)
        artifacts["report"] = report_path

    _emit(progress, "done", 1.0)
    return PipelineResult(workdir=str(workdir), report=report,
                          artifacts=artifacts)
