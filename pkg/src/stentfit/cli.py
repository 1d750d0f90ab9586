"""Command-line entry points for every pipeline stage plus the HTTP service.

Exit codes: 0 success, 1 domain error (message on stderr), 2 usage error.
"""

from __future__ import annotations

import functools
import json
import os
import socket

import click
import numpy as np
from pydantic import ValidationError

from .centerline import CenterlineSet
from .config import PipelineConfig
from .distance import wall_field
from .errors import IoFailure, StentfitError
from .measure import measure, ostium_coverage
from .phantom import OstiumMarker, Landmarks, phantom_generate, spec_from_dict
from .pipeline import run_pipeline
from .segmentation import (IntensityWindow, SeedPoint,
                           largest_component_cleanup, region_grow)
from .skeleton import extract_centerlines, thin
from .solver import expansion_mode, run
from .stent import build_initial_stent, export_mesh, mesh_from_dict, mesh_to_dict
from .volume import load_mask, load_volume, save_mask, save_volume


def _header(base_path: str) -> str:
    """Accept either a base path or the .svh header path itself."""
    return base_path if base_path.endswith(".svh") else base_path + ".svh"


def _domain(fn):
    """Convert domain errors into exit-code-1 CLI errors."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (StentfitError, ValidationError, OSError) as exc:
            raise click.ClickException(str(exc)) from exc
    return wrapper


@click.group()
def cli():
    """Vessel segmentation, centerline extraction, stent simulation and
    AAA measurement."""


@cli.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True),
              help="JSON file: dims, spacing, optional origin/axis_xy, and a "
                   "'phantom' object with the analytic shape parameters.")
@click.option("--out", "out_base", required=True,
              help="Output base path (writes <out>.svh/.svr and <out>_truth.json).")
@_domain
def phantom(spec_path, out_base):
    """Voxelize an analytic bifurcated-vessel phantom with ground truth."""
    with open(spec_path) as fh:
        cfg = json.load(fh)
    spec = spec_from_dict(cfg["phantom"])
    vol, truth = phantom_generate(
        spec, cfg["dims"], cfg["spacing"],
        origin=cfg.get("origin", (0.0, 0.0, 0.0)),
        axis_xy=cfg.get("axis_xy"))
    save_volume(vol, out_base)
    truth.save(out_base + "_truth.json")
    click.echo(f"wrote {out_base}.svh/.svr and {out_base}_truth.json")


@cli.command()
@click.option("--volume", "vol_base", required=True,
              help="Volume base path (.svh header).")
@click.option("--seed", nargs=3, type=float, required=True,
              help="Seed point in mm (x y z).")
@click.option("--lower", type=float, required=True, help="Window lower bound.")
@click.option("--upper", type=float, required=True, help="Window upper bound.")
@click.option("--out", "out_base", required=True, help="Mask output base path.")
@_domain
def segment(vol_base, seed, lower, upper, out_base):
    """Region-grow the lumen from a seed and keep its connected component."""
    vol = load_volume(_header(vol_base))
    mask = largest_component_cleanup(
        region_grow(vol, SeedPoint(tuple(seed)), IntensityWindow(lower, upper)))
    save_mask(mask, out_base)
    click.echo(f"wrote {out_base}.svh/.svr ({mask.count} voxels)")


@cli.command()
@click.option("--mask", "mask_base", required=True, help="Mask base path.")
@click.option("--out", "out_path", required=True, help="Centerline JSON path.")
@click.option("--prune-length", default=10, show_default=True, type=int)
@click.option("--sample-step", default=1.0, show_default=True, type=float)
@_domain
def skeleton(mask_base, out_path, prune_length, sample_step):
    """Thin the mask and extract the bifurcated centerline set."""
    mask = load_mask(_header(mask_base))
    cl = extract_centerlines(thin(mask), mask,
                             prune_length=prune_length, sample_step=sample_step)
    cl.save(out_path)
    click.echo(f"wrote {out_path} (bifurcation at "
               f"{tuple(round(v, 2) for v in cl.bifurcation_point)})")


@cli.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True),
              help="Pipeline config JSON (stent + solver sections used).")
@click.option("--mask", "mask_base", required=True, help="Mask base path.")
@click.option("--centerlines", "cl_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, help="Output directory.")
@_domain
def simulate(config_path, mask_base, cl_path, out_dir):
    """Build the initial stent on the centerlines and simulate deployment."""
    cfg = PipelineConfig.load(config_path)
    mask = load_mask(_header(mask_base))
    cl = CenterlineSet.load(cl_path)
    mesh = build_initial_stent(cl, cfg.stent.r0_trunk, cfg.stent.r0_limb,
                               cfg.stent.n_t, cfg.stent.trunk_rings,
                               cfg.stent.limb_rings)
    os.makedirs(out_dir, exist_ok=True)
    export_mesh(mesh, os.path.join(out_dir, "mesh_initial.txt"))
    params = cfg.solver.to_params()
    if cfg.solver.mode == "measure":
        params = expansion_mode(params, cfg.solver.lumen_radius_hint)
    deformed, trace = run(mesh, wall_field(mask), params)
    export_mesh(deformed, os.path.join(out_dir, "mesh_final.txt"))
    with open(os.path.join(out_dir, "mesh_final.json"), "w") as fh:
        json.dump(mesh_to_dict(deformed), fh)
    trace.write_csv(os.path.join(out_dir, "trace.csv"))
    click.echo(f"wrote meshes and trace to {out_dir} "
               f"({len(trace.max_disp)} iterations)")


@cli.command("measure")
@click.option("--mesh", "mesh_path", required=True, type=click.Path(exists=True),
              help="Final mesh JSON (mesh_final.json from simulate).")
@click.option("--centerlines", "cl_path", required=True,
              type=click.Path(exists=True))
@click.option("--proximal-site", type=float, required=True,
              help="Proximal implantation site (mm along the trunk).")
@click.option("--aneurysm-region", nargs=2, type=float, required=True)
@click.option("--distal-neck-region", nargs=2, type=float, required=True)
@click.option("--markers", "markers_path", type=click.Path(exists=True),
              default=None, help="Optional ostium marker JSON list.")
@click.option("--d-tol", type=float, default=float(np.sqrt(3.0)),
              show_default=True, help="Coverage distance tolerance (mm).")
@click.option("--out", "out_path", required=True, help="Report JSON path.")
@_domain
def measure_cmd(mesh_path, cl_path, proximal_site, aneurysm_region,
                distal_neck_region, markers_path, d_tol, out_path):
    """Extract the clinical diameters (a)-(f) and ostium coverage."""
    with open(mesh_path) as fh:
        mesh = mesh_from_dict(json.load(fh))
    cl = CenterlineSet.load(cl_path)
    lm = Landmarks(proximal_site, tuple(aneurysm_region),
                   tuple(distal_neck_region))
    covered = ()
    if markers_path is not None:
        with open(markers_path) as fh:
            markers = [OstiumMarker(tuple(m["point"]), float(m["radius"]),
                                    str(m["label"]))
                       for m in json.load(fh)]
        covered = ostium_coverage(mesh, markers, d_tol)
    report = measure(mesh, cl, lm, covered_ostia=covered)
    report.save(out_path)
    click.echo(f"wrote {out_path}: " + "  ".join(
        f"{k}={getattr(report, k):.2f}" for k in "abcdef"))


@cli.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True), help="Full pipeline config JSON.")
@click.option("--workdir", required=True, help="Artifact output directory.")
@_domain
def pipeline(config_path, workdir):
    """Run segment -> skeleton -> simulate -> measure in one pass."""
    cfg = PipelineConfig.load(config_path)

    def progress(stage, fraction):
        click.echo(f"[{fraction:4.0%}] {stage}")

    result = run_pipeline(cfg, workdir, progress=progress)
    for name, path in result.artifacts.items():
        click.echo(f"  {name}: {path}")


@cli.command()
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--workdir", default=None,
              help="Job directory root (default: $STENTFIT_WORKDIR or ./jobs).")
@click.option("--volume", "vol_base", default=None,
              help="Volume served by the slice endpoint.")
@_domain
def serve(port, host, workdir, vol_base):
    """Run the local HTTP pipeline service."""
    import uvicorn

    from .service import create_app

    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as probe:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            probe.bind((host, port))
        except OSError as exc:
            raise IoFailure(
                f"409: port {port} on {host} is busy") from exc

    app = create_app(workdir=workdir, volume_path=vol_base)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main():
    cli(prog_name="stentfit")


if __name__ == "__main__":
    main()
