"""Centerline polylines: the bifurcated trunk/left/right set and resampling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


def polyline_length(pts) -> float:
    pts = np.asarray(pts, dtype=np.float64)
    if len(pts) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


def resample_by_chord(pts, step):
    """Resample a polyline so consecutive output points are exactly `step`
    (Euclidean) apart, starting at the first input point.

    Marches along the polyline and intersects each segment with a sphere of
    radius `step` around the last output point; the trailing remainder
    shorter than `step` is dropped.
    """
    pts = np.asarray(pts, dtype=np.float64)
    out = [pts[0].copy()]
    cur = pts[0].copy()
    seg = 0
    pos = pts[0].copy()
    while seg < len(pts) - 1:
        a, b = pos, pts[seg + 1]
        d = b - a
        seg_len2 = float(d @ d)
        if seg_len2 == 0.0:
            seg += 1
            pos = pts[seg].copy()
            continue
        # solve |a + t d - cur| = step for t in (0, 1]
        ac = a - cur
        A = seg_len2
        B = 2.0 * float(ac @ d)
        C = float(ac @ ac) - step * step
        disc = B * B - 4 * A * C
        t = None
        if disc >= 0:
            r = (-B + np.sqrt(disc)) / (2 * A)
            if 0.0 < r <= 1.0:
                t = r
        if t is None:
            seg += 1
            if seg < len(pts) - 1:
                pos = pts[seg].copy()
            continue
        cur = a + t * d
        out.append(cur.copy())
        pos = cur
    return np.asarray(out)


def smooth_polyline(pts, window=5):
    """Moving-average smoothing with both endpoints pinned."""
    pts = np.asarray(pts, dtype=np.float64)
    n = len(pts)
    if n <= 2 or window <= 1:
        return pts.copy()
    half = window // 2
    out = pts.copy()
    for i in range(1, n - 1):
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        out[i] = pts[lo:hi].mean(axis=0)
    return out


@dataclass(frozen=True)
class CenterlineSet:
    """Trunk (proximal -> bifurcation) and two limbs (bifurcation -> distal).

    All polylines are uniformly resampled: consecutive points are sample_step
    apart. The trunk ends, and each limb begins, at bifurcation_point. The
    left limb is the one whose distal endpoint has the smaller x coordinate.
    Limbs may be empty for degenerate straight-tube geometries.
    """

    trunk: np.ndarray = field(repr=False)
    left_limb: np.ndarray = field(repr=False)
    right_limb: np.ndarray = field(repr=False)
    bifurcation_point: tuple[float, float, float]
    sample_step: float = 1.0

    def branches(self):
        return {
            "trunk": self.trunk,
            "left": self.left_limb,
            "right": self.right_limb,
        }

    def to_dict(self):
        return {
            "trunk": np.asarray(self.trunk).tolist(),
            "left_limb": np.asarray(self.left_limb).tolist(),
            "right_limb": np.asarray(self.right_limb).tolist(),
            "bifurcation_point": list(self.bifurcation_point),
            "sample_step": self.sample_step,
            "units": "mm",
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            trunk=np.asarray(d["trunk"], dtype=np.float64),
            left_limb=np.asarray(d["left_limb"], dtype=np.float64),
            right_limb=np.asarray(d["right_limb"], dtype=np.float64),
            bifurcation_point=tuple(d["bifurcation_point"]),
            sample_step=float(d["sample_step"]),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
