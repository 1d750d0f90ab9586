"""Shared fixtures: the reference AAA phantom pipeline, computed once."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import pytest

from stentfit.distance import wall_field
from stentfit.measure import measure
from stentfit.phantom import Landmarks, PhantomSpec, PhantomTruth, phantom_generate
from stentfit.segmentation import (IntensityWindow, SeedPoint,
                                   largest_component_cleanup, region_grow)
from stentfit.skeleton import extract_centerlines, thin
from stentfit.solver import SolverParams, expansion_mode, run
from stentfit.stent import build_initial_stent
from stentfit.volume import load_volume

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

# Reference bifurcated AAA phantom. The limbs are long enough (56 mm) that
# their middle third - where the iliac diameters are sampled - lies past the
# near-junction zone where the two limb lumens still overlap.
AAA_SPEC = PhantomSpec(
    trunk_radius=9.0, trunk_length=32.0,
    aneurysm_peak_radius=25.0, aneurysm_center=18.0, aneurysm_width=5.0,
    distal_neck_radius=8.0,
    limb_radius=6.0, limb_length=56.0, limb_half_angle=22.0,
    neck_blend=(24.0, 29.0),
    landmarks=Landmarks(8.0, (10.0, 26.0), (27.0, 31.0)),
)
AAA_DIMS = (64, 64, 96)
AAA_SPACING = (1.0, 1.0, 1.0)
AAA_SEED = (32.5, 32.5, 75.0)
AAA_WINDOW = (50.0, 150.0)

# Frozen measurement-run solver parameters; the wall weight 2.25 balances
# the shallow-ramp overshoot at the proximal sites against the wall-bias
# undershoot at the narrow distal neck.
MEASURE_BASE = dict(R_trunk=4.0, R_limb=3.0, w_vesselWall=2.25, w_balloon=1.0,
                    F_pressure=0.5, gamma=10.0, max_iterations=2500,
                    convergence_eps=1e-4)
STENT_SHAPE = dict(r0_trunk=4.0, r0_limb=3.0, n_t=12,
                   trunk_rings=26, limb_rings=13)


def measurement_params(lumen_radius_hint=25.0) -> SolverParams:
    return expansion_mode(SolverParams(**MEASURE_BASE), lumen_radius_hint)


def mapped_landmarks(expanded_mesh, spec=AAA_SPEC) -> Landmarks:
    """Landmarks re-expressed in the stent trunk's arc frame.

    The stent trunk starts where the extracted centerline starts (a few mm
    distal of the phantom's proximal cap) but ends at the same bifurcation,
    so the frames differ by a constant shift.
    """
    lm = spec.landmarks
    off = spec.trunk_length - float(expanded_mesh.ring_arcs["trunk"][-1])
    return Landmarks(
        lm.proximal_site - off,
        (lm.aneurysm_region[0] - off, lm.aneurysm_region[1] - off),
        (lm.distal_neck_region[0] - off, lm.distal_neck_region[1] - off),
    )


@dataclass(frozen=True)
class PhantomRun:
    volume: object
    truth: PhantomTruth
    mask: object
    centerlines: object
    initial_mesh: object
    expanded: object
    trace: object
    report: object


def run_reference_pipeline(spec, seed=AAA_SEED, window=AAA_WINDOW,
                           dims=AAA_DIMS, spacing=AAA_SPACING) -> PhantomRun:
    vol, truth = phantom_generate(spec, dims, spacing)
    mask = largest_component_cleanup(
        region_grow(vol, SeedPoint(seed), IntensityWindow(*window)))
    cl = extract_centerlines(thin(mask), mask)
    mesh = build_initial_stent(cl, **STENT_SHAPE)
    expanded, trace = run(mesh, wall_field(mask), measurement_params())
    report = measure(expanded, cl, mapped_landmarks(expanded, spec))
    return PhantomRun(volume=vol, truth=truth, mask=mask, centerlines=cl,
                      initial_mesh=mesh, expanded=expanded, trace=trace,
                      report=report)


@pytest.fixture(scope="session")
def aaa_run() -> PhantomRun:
    return run_reference_pipeline(AAA_SPEC)


@pytest.fixture(scope="session")
def cylinder_volume():
    return load_volume(os.path.join(FIXTURES, "cylinder64.svh"))


@pytest.fixture(scope="session")
def cylinder_truth():
    return PhantomTruth.load(os.path.join(FIXTURES, "cylinder64_truth.json"))


def frozen_pipeline_config(volume_header: str) -> dict:
    """Full-pipeline configuration reproducing the reference AAA run.

    Landmarks are expressed in the stent trunk frame, which for this phantom
    starts 7 mm distal of the phantom's proximal cap (the extracted
    centerline cannot reach into the flat cap).
    """
    return {
        "volume": volume_header,
        "seed": list(AAA_SEED),
        "window": {"lower": AAA_WINDOW[0], "upper": AAA_WINDOW[1]},
        "stent": {"n_t": STENT_SHAPE["n_t"],
                  "trunk_rings": STENT_SHAPE["trunk_rings"],
                  "limb_rings": STENT_SHAPE["limb_rings"],
                  "r0_trunk": STENT_SHAPE["r0_trunk"],
                  "r0_limb": STENT_SHAPE["r0_limb"]},
        "solver": {"R_trunk": MEASURE_BASE["R_trunk"],
                   "R_limb": MEASURE_BASE["R_limb"],
                   "w_vesselWall": MEASURE_BASE["w_vesselWall"],
                   "w_balloon": MEASURE_BASE["w_balloon"],
                   "F_pressure": MEASURE_BASE["F_pressure"],
                   "gamma": MEASURE_BASE["gamma"],
                   "max_iterations": MEASURE_BASE["max_iterations"],
                   "convergence_eps": MEASURE_BASE["convergence_eps"],
                   "mode": "measure", "lumen_radius_hint": 25.0},
        "landmarks": {"proximal_site": 1.0, "aneurysm_region": [3.0, 19.0],
                      "distal_neck_region": [20.0, 24.0]},
    }


@pytest.fixture(scope="session")
def aaa_volume_on_disk(tmp_path_factory):
    """The reference AAA phantom saved in the on-disk volume format."""
    from stentfit.volume import save_volume
    vol, truth = phantom_generate(AAA_SPEC, AAA_DIMS, AAA_SPACING)
    base = str(tmp_path_factory.mktemp("aaa") / "aaa")
    save_volume(vol, base)
    truth.save(base + "_truth.json")
    return base


def directed_distances(src, dst):
    """Mean and max distance from each point of src to the polyline dst."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    d = np.linalg.norm(src[:, None, :] - dst[None, :, :], axis=2).min(axis=1)
    return float(d.mean()), float(d.max())
