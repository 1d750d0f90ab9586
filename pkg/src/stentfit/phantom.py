"""Analytic AAA phantom: fusiform trunk plus two straight limbs, with exact
ground-truth centerlines, radius profiles and diameters for validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .centerline import CenterlineSet
from .errors import DegenerateContrast, GeometryOverflow
from .volume import VoxelVolume


@dataclass(frozen=True)
class OstiumMarker:
    point: tuple[float, float, float]  # mm, on the lumen surface
    radius: float  # disc radius, mm
    label: str


@dataclass(frozen=True)
class Landmarks:
    """Measurement sites in trunk arc length (mm, proximal end = 0)."""

    proximal_site: float
    aneurysm_region: tuple[float, float]
    distal_neck_region: tuple[float, float]

    def __post_init__(self):
        a0, a1 = self.aneurysm_region
        d0, d1 = self.distal_neck_region
        if not (0 <= self.proximal_site < a0 <= a1 <= d0 <= d1):
            raise ValueError("landmark regions must be ordered proximal to distal")


@dataclass(frozen=True)
class PhantomSpec:
    trunk_radius: float
    trunk_length: float
    aneurysm_peak_radius: float
    aneurysm_center: float  # arc length mm along trunk
    aneurysm_width: float  # Gaussian bump width, mm
    distal_neck_radius: float
    limb_radius: float
    limb_length: float
    limb_half_angle: float  # degrees
    inside_intensity: float = 100.0
    outside_intensity: float = 0.0
    noise_sigma: float = 0.0
    # arc window over which the base radius blends trunk -> distal neck;
    # defaults to the last quarter of the trunk
    neck_blend: tuple[float, float] | None = None
    markers: tuple[OstiumMarker, ...] = ()
    landmarks: Landmarks | None = None
    noise_seed: int = 0

    def __post_init__(self):
        for name in ("trunk_radius", "aneurysm_peak_radius", "distal_neck_radius",
                     "limb_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.inside_intensity == self.outside_intensity:
            raise DegenerateContrast("inside and outside intensities are equal")
        if self.aneurysm_peak_radius < self.trunk_radius:
            raise ValueError("aneurysm_peak_radius must be >= trunk_radius")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    @property
    def neck_window(self):
        if self.neck_blend is not None:
            return self.neck_blend
        return (0.75 * self.trunk_length, 0.9 * self.trunk_length)


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


@dataclass(frozen=True)
class PhantomTruth:
    centerlines: CenterlineSet
    # per-branch (arc_mm, radius_mm) sample arrays
    radius_profile: dict = field(repr=False)
    bifurcation_point: tuple[float, float, float]
    diameters: dict  # keys a..f, mm
    markers: tuple[OstiumMarker, ...]
    landmarks: Landmarks | None = None
    # analytic radius callables, keyed by branch; not serialized
    radius_fn: dict = field(default=None, repr=False, compare=False)

    def to_dict(self):
        return {
            "centerlines": self.centerlines.to_dict(),
            "radius_profile": {
                k: np.asarray(v).tolist() for k, v in self.radius_profile.items()
            },
            "bifurcation_point": list(self.bifurcation_point),
            "diameters": self.diameters,
            "markers": [
                {"point": list(m.point), "radius": m.radius, "label": m.label}
                for m in self.markers
            ],
            "landmarks": None if self.landmarks is None else {
                "proximal_site": self.landmarks.proximal_site,
                "aneurysm_region": list(self.landmarks.aneurysm_region),
                "distal_neck_region": list(self.landmarks.distal_neck_region),
            },
            "units": "mm",
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_dict(cls, d):
        lm = d.get("landmarks")
        return cls(
            centerlines=CenterlineSet.from_dict(d["centerlines"]),
            radius_profile={k: np.asarray(v) for k, v in d["radius_profile"].items()},
            bifurcation_point=tuple(d["bifurcation_point"]),
            diameters=d["diameters"],
            markers=tuple(
                OstiumMarker(tuple(m["point"]), m["radius"], m["label"])
                for m in d["markers"]
            ),
            landmarks=None if lm is None else Landmarks(
                lm["proximal_site"], tuple(lm["aneurysm_region"]),
                tuple(lm["distal_neck_region"]),
            ),
        )

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class PhantomGeometry:
    """Analytic lumen: vertical trunk with radius profile r(s), bifurcating
    into two straight limb tubes at +-limb_half_angle from the -z axis."""

    def __init__(self, spec: PhantomSpec, top: np.ndarray):
        self.spec = spec
        self.top = np.asarray(top, dtype=np.float64)  # proximal trunk axis point
        self.bif = self.top + np.array([0.0, 0.0, -spec.trunk_length])
        ang = math.radians(spec.limb_half_angle)
        # left limb towards -x by convention (smaller distal x)
        self.dir_left = np.array([-math.sin(ang), 0.0, -math.cos(ang)])
        self.dir_right = np.array([math.sin(ang), 0.0, -math.cos(ang)])

    def trunk_radius_at(self, s):
        """Analytic trunk radius profile at arc length s from the proximal end."""
        sp = self.spec
        s = np.asarray(s, dtype=np.float64)
        n0, n1 = sp.neck_window
        base = sp.trunk_radius + (sp.distal_neck_radius - sp.trunk_radius) * \
            _smoothstep((s - n0) / max(n1 - n0, 1e-12))
        bump = (sp.aneurysm_peak_radius - sp.trunk_radius) * np.exp(
            -((s - sp.aneurysm_center) ** 2) / (2.0 * sp.aneurysm_width ** 2)
        )
        return base + bump

    def inside_trunk(self, pts):
        pts = np.atleast_2d(pts)
        s = self.top[2] - pts[:, 2]
        rad = np.hypot(pts[:, 0] - self.top[0], pts[:, 1] - self.top[1])
        ok = (s >= 0) & (s <= self.spec.trunk_length)
        return ok & (rad <= self.trunk_radius_at(s))

    def _inside_limb(self, pts, direction):
        pts = np.atleast_2d(pts)
        v = pts - self.bif
        proj = v @ direction
        ok = (proj >= 0) & (proj <= self.spec.limb_length)
        perp = v - proj[:, None] * direction
        return ok & (np.linalg.norm(perp, axis=1) <= self.spec.limb_radius)

    def inside(self, pts):
        """Vectorized point-in-lumen predicate (union of trunk and limbs)."""
        res = self.inside_trunk(pts)
        if self.spec.limb_length > 0:
            res = res | self._inside_limb(pts, self.dir_left)
            res = res | self._inside_limb(pts, self.dir_right)
        return res

    def truth(self, sample_step=1.0) -> PhantomTruth:
        sp = self.spec
        n_trunk = int(round(sp.trunk_length / sample_step))
        s_trunk = np.arange(n_trunk + 1) * sample_step
        trunk = self.top[None, :] + np.outer(s_trunk, [0.0, 0.0, -1.0])
        if sp.limb_length > 0:
            n_limb = int(math.floor(sp.limb_length / sample_step))
            s_limb = np.arange(n_limb + 1) * sample_step
            left = self.bif[None, :] + np.outer(s_limb, self.dir_left)
            right = self.bif[None, :] + np.outer(s_limb, self.dir_right)
        else:
            s_limb = np.zeros(0)
            left = np.zeros((0, 3))
            right = np.zeros((0, 3))
        cl = CenterlineSet(
            trunk=trunk, left_limb=left, right_limb=right,
            bifurcation_point=tuple(self.bif), sample_step=sample_step,
        )
        profile = {
            "trunk": np.column_stack([s_trunk, self.trunk_radius_at(s_trunk)]),
            "left": np.column_stack([s_limb, np.full_like(s_limb, sp.limb_radius)]),
            "right": np.column_stack([s_limb, np.full_like(s_limb, sp.limb_radius)]),
        }
        lm = sp.landmarks
        diameters = {}
        if lm is not None:
            fine = np.arange(0.0, sp.trunk_length + 1e-9, 0.01)
            r_fine = self.trunk_radius_at(fine)
            diameters["a"] = 2.0 * float(self.trunk_radius_at(lm.proximal_site))
            diameters["b"] = 2.0 * float(self.trunk_radius_at(lm.proximal_site + 15.0))
            a0, a1 = lm.aneurysm_region
            sel = (fine >= a0) & (fine <= a1)
            diameters["c"] = 2.0 * float(r_fine[sel].max())
            d0, d1 = lm.distal_neck_region
            sel = (fine >= d0) & (fine <= d1)
            diameters["d"] = 2.0 * float(r_fine[sel].min())
            diameters["e"] = 2.0 * sp.limb_radius
            diameters["f"] = 2.0 * sp.limb_radius
        return PhantomTruth(
            centerlines=cl,
            radius_profile=profile,
            bifurcation_point=tuple(self.bif),
            diameters=diameters,
            markers=sp.markers,
            landmarks=lm,
            radius_fn={
                "trunk": self.trunk_radius_at,
                "left": lambda s: np.full_like(np.asarray(s, dtype=float), sp.limb_radius),
                "right": lambda s: np.full_like(np.asarray(s, dtype=float), sp.limb_radius),
            },
        )


def phantom_geometry(spec: PhantomSpec, dims, spacing,
                     origin=(0.0, 0.0, 0.0),
                     axis_xy=None) -> PhantomGeometry:
    """Place the analytic phantom centered in the volume; raises
    GeometryOverflow if it does not fit with a 2-voxel margin.

    axis_xy overrides the (x, y) position of the trunk axis, e.g. to align
    a straight-tube fixture with a voxel-center column.
    """
    dims = tuple(int(d) for d in dims)
    spacing = tuple(float(s) for s in spacing)
    origin = tuple(float(o) for o in origin)
    extent = np.array([dims[a] * spacing[a] for a in range(3)])
    margin = 2.0 * max(spacing)

    ang = math.radians(spec.limb_half_angle)
    # vertical span: trunk plus limb drop (incl. the tube end cap)
    limb_drop = spec.limb_length * math.cos(ang) + spec.limb_radius * math.sin(ang)
    span_z = spec.trunk_length + limb_drop
    max_r = max(spec.aneurysm_peak_radius, spec.trunk_radius, spec.distal_neck_radius)
    reach_x = max(max_r,
                  spec.limb_length * math.sin(ang) + spec.limb_radius * math.cos(ang))
    if (span_z + 2 * margin > extent[2]
            or 2 * reach_x + 2 * margin > extent[0]
            or 2 * max_r + 2 * margin > extent[1]):
        raise GeometryOverflow("phantom does not fit the volume with a 2-voxel margin")

    if axis_xy is None:
        cx = origin[0] + extent[0] / 2.0
        cy = origin[1] + extent[1] / 2.0
    else:
        cx, cy = float(axis_xy[0]), float(axis_xy[1])
        if not (origin[0] + margin + reach_x <= cx <= origin[0] + extent[0] - margin - reach_x
                and origin[1] + margin + max_r <= cy <= origin[1] + extent[1] - margin - max_r):
            raise GeometryOverflow("axis_xy leaves no 2-voxel margin")
    z_top = origin[2] + extent[2] - margin - (extent[2] - 2 * margin - span_z) / 2.0
    return PhantomGeometry(spec, np.array([cx, cy, z_top]))


def phantom_generate(spec: PhantomSpec, dims, spacing,
                     origin=(0.0, 0.0, 0.0),
                     axis_xy=None) -> tuple[VoxelVolume, PhantomTruth]:
    """Voxelize the analytic phantom and record its exact ground truth."""
    geom = phantom_geometry(spec, dims, spacing, origin, axis_xy=axis_xy)
    dims = tuple(int(d) for d in dims)
    spacing = tuple(float(s) for s in spacing)
    origin = tuple(float(o) for o in origin)

    xs = origin[0] + (np.arange(dims[0]) + 0.5) * spacing[0]
    ys = origin[1] + (np.arange(dims[1]) + 0.5) * spacing[1]
    zs = origin[2] + (np.arange(dims[2]) + 0.5) * spacing[2]
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    inside = geom.inside(pts).reshape(dims)

    data = np.where(inside, spec.inside_intensity, spec.outside_intensity).astype(np.float64)
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.noise_seed)
        data = data + rng.normal(0.0, spec.noise_sigma, size=data.shape)
    vol = VoxelVolume(dims=dims, spacing=spacing, origin=origin,
                      data=data.astype(np.float32))
    truth = geom.truth(sample_step=1.0)
    return vol, truth


def spec_from_dict(d) -> PhantomSpec:
    d = dict(d)
    markers = tuple(
        OstiumMarker(tuple(m["point"]), float(m["radius"]), str(m["label"]))
        for m in d.pop("markers", [])
    )
    lm = d.pop("landmarks", None)
    landmarks = None if lm is None else Landmarks(
        float(lm["proximal_site"]),
        tuple(lm["aneurysm_region"]),
        tuple(lm["distal_neck_region"]),
    )
    nb = d.pop("neck_blend", None)
    return PhantomSpec(markers=markers, landmarks=landmarks,
                       neck_blend=None if nb is None else tuple(nb), **d)
