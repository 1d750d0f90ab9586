"""Clinical diameters (a)-(f) from the expanded stent and ostium coverage."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .centerline import CenterlineSet
from .errors import LandmarkOutOfRange, RegionEmpty
from .phantom import Landmarks, OstiumMarker
from .stent import StentMesh

__all__ = ["Landmarks", "MeasurementReport", "ring_diameter", "measure",
           "ostium_coverage"]


@dataclass(frozen=True)
class MeasurementReport:
    a: float  # aortic diameter at the proximal implantation site
    b: float  # 15 mm inferior to the proximal implantation site
    c: float  # maximum aneurysm diameter
    d: float  # minimum diameter of the distal neck
    e: float  # right common iliac diameter
    f: float  # left common iliac diameter
    profile: dict  # branch -> [(arc mm, diameter mm), ...]
    covered_ostia: tuple = ()

    def __post_init__(self):
        if not (self.c >= self.a and self.c >= self.d):
            raise ValueError("aneurysm diameter must dominate neck diameters")
        for name in "abcdef":
            if getattr(self, name) <= 0:
                raise ValueError(f"diameter {name} must be > 0")

    def to_dict(self):
        return {
            "a": self.a, "b": self.b, "c": self.c,
            "d": self.d, "e": self.e, "f": self.f,
            "profile": {k: [list(p) for p in v] for k, v in self.profile.items()},
            "covered_ostia": list(self.covered_ostia),
            "units": "mm",
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_dict(cls, d):
        return cls(a=d["a"], b=d["b"], c=d["c"], d=d["d"], e=d["e"], f=d["f"],
                   profile=d["profile"], covered_ostia=tuple(d["covered_ostia"]))


def ring_diameter(mesh: StentMesh, seg: str, ring: int) -> float:
    """Twice the mean distance from the ring's vertices to its centroid."""
    idx = mesh.ring_indices(seg, ring)
    pts = mesh.vertices[idx]
    centroid = pts.mean(axis=0)
    return 2.0 * float(np.mean(np.linalg.norm(pts - centroid, axis=1)))


def _diameter_profile(mesh: StentMesh):
    prof = {}
    for seg in mesh.seg_names:
        arcs = np.asarray(mesh.ring_arcs[seg])
        prof[seg] = [(float(arcs[s]), ring_diameter(mesh, seg, s))
                     for s in range(mesh.seg_rings[seg])]
    return prof


def _nearest_ring(arcs, s):
    return int(np.argmin(np.abs(np.asarray(arcs) - s)))


def measure(expanded: StentMesh, cl: CenterlineSet, lm: Landmarks,
            covered_ostia=()) -> MeasurementReport:
    """Extract diameters (a)-(f) from a fully expanded stent mesh."""
    arcs_t = np.asarray(expanded.ring_arcs["trunk"])
    trunk_len = float(arcs_t[-1])
    if not 0 <= lm.proximal_site <= trunk_len:
        raise LandmarkOutOfRange("proximal implantation site beyond the trunk")
    if lm.proximal_site + 15.0 > trunk_len:
        raise LandmarkOutOfRange("site + 15 mm extends past the trunk end")
    for lo, hi in (lm.aneurysm_region, lm.distal_neck_region):
        if not 0 <= lo <= hi <= trunk_len:
            raise LandmarkOutOfRange(f"region [{lo}, {hi}] outside the trunk")

    profile = _diameter_profile(expanded)
    trunk_d = np.array([d for _, d in profile["trunk"]])

    a = trunk_d[_nearest_ring(arcs_t, lm.proximal_site)]
    b = trunk_d[_nearest_ring(arcs_t, lm.proximal_site + 15.0)]

    def region(bounds):
        lo, hi = bounds
        sel = (arcs_t >= lo) & (arcs_t <= hi)
        if not sel.any():
            raise RegionEmpty(f"no trunk ring inside [{lo}, {hi}]")
        return trunk_d[sel]

    c = float(region(lm.aneurysm_region).max())
    d = float(region(lm.distal_neck_region).min())

    def limb_median(seg):
        n = expanded.seg_rings[seg]
        lo, hi = n // 3, max(n // 3 + 1, (2 * n) // 3)
        vals = [ring_diameter(expanded, seg, s) for s in range(lo, hi)]
        return float(np.median(vals))

    return MeasurementReport(
        a=float(a), b=float(b), c=c, d=d,
        e=limb_median("right"), f=limb_median("left"),
        profile=profile, covered_ostia=tuple(covered_ostia),
    )


def ostium_coverage(expanded: StentMesh, markers, d_tol: float) -> list[str]:
    """Labels of ostium markers lying within (disc radius + d_tol) of any
    stent quad centroid; d_tol is one voxel diagonal of the source volume."""
    if not markers:
        return []
    quads = np.asarray(expanded.quads())
    centroids = expanded.vertices[quads].mean(axis=1)
    covered = []
    for m in markers:
        p = np.asarray(m.point, dtype=np.float64)
        dist = np.min(np.linalg.norm(centroids - p, axis=1))
        if dist <= m.radius + d_tol:
            covered.append(m.label)
    return sorted(covered)
