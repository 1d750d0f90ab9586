"""Bifurcated quadrilateral stent surface along the three centerlines.

Three tube patches (trunk, left, right) share one vertex numbering; a
connection element maps virtual rings past each segment boundary onto real
vertices of the neighboring segment so derivative stencils span the
junction. The junction is intentionally not watertight: coupling is purely
through the stencils.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .centerline import CenterlineSet
from .errors import CenterlineTooShort, InvalidConnection, IoFailure, RadiusNonPositive


class Curve:
    """Arc-length parameterized polyline."""

    def __init__(self, pts):
        self.pts = np.asarray(pts, dtype=np.float64)
        if len(self.pts) < 2:
            raise CenterlineTooShort("polyline needs at least two points")
        seg = np.diff(self.pts, axis=0)
        self.seg_len = np.linalg.norm(seg, axis=1)
        if np.any(self.seg_len == 0):
            keep = np.concatenate([[True], self.seg_len > 0])
            self.pts = self.pts[keep]
            seg = np.diff(self.pts, axis=0)
            self.seg_len = np.linalg.norm(seg, axis=1)
        self.cum = np.concatenate([[0.0], np.cumsum(self.seg_len)])
        self.length = float(self.cum[-1])
        if self.length <= 0:
            raise CenterlineTooShort("polyline has zero length")
        self._dirs = seg / self.seg_len[:, None]

    def _segment(self, s):
        i = int(np.searchsorted(self.cum, s, side="right") - 1)
        return min(max(i, 0), len(self.seg_len) - 1)

    def point_at(self, s):
        i = self._segment(s)
        return self.pts[i] + (s - self.cum[i]) * self._dirs[i]

    def tangent_at(self, s):
        i = self._segment(s)
        lo, hi = max(i - 1, 0), min(i + 1, len(self._dirs) - 1)
        t = self._dirs[lo:hi + 1].mean(axis=0)
        return t / np.linalg.norm(t)


def _initial_normal(tangent):
    axes = np.eye(3)
    a = axes[int(np.argmin(np.abs(axes @ tangent)))]
    n = a - (a @ tangent) * tangent
    return n / np.linalg.norm(n)


def rotation_minimizing_frames(centers, tangents, normal0):
    """Double-reflection frame transport along a discrete curve."""
    centers = np.asarray(centers, dtype=np.float64)
    tangents = np.asarray(tangents, dtype=np.float64)
    n = len(centers)
    normals = np.empty((n, 3))
    normals[0] = normal0
    for i in range(n - 1):
        v1 = centers[i + 1] - centers[i]
        c1 = float(v1 @ v1)
        if c1 < 1e-16:
            normals[i + 1] = normals[i]
            continue
        rl = normals[i] - (2.0 / c1) * (v1 @ normals[i]) * v1
        tl = tangents[i] - (2.0 / c1) * (v1 @ tangents[i]) * v1
        v2 = tangents[i + 1] - tl
        c2 = float(v2 @ v2)
        if c2 < 1e-16:
            normals[i + 1] = rl
        else:
            normals[i + 1] = rl - (2.0 / c2) * (v2 @ rl) * v2
        # re-orthogonalize against drift
        t = tangents[i + 1]
        nrm = normals[i + 1] - (normals[i + 1] @ t) * t
        normals[i + 1] = nrm / np.linalg.norm(nrm)
    return normals


@dataclass(frozen=True)
class ConnectionElement:
    """Virtual-index map: (segment, ring, t) outside a patch -> real vertex
    coordinates (segment, ring, t) of the neighboring patch."""

    mapping: dict

    def resolve(self, key):
        if key not in self.mapping:
            raise InvalidConnection(f"no predecessor mapping for {key}")
        return self.mapping[key]


@dataclass(frozen=True)
class StentMesh:
    n_t: int
    seg_names: tuple
    seg_rings: dict
    vertices: np.ndarray = field(repr=False)       # (N, 3) mm
    ring_centers: dict = field(repr=False)         # seg -> (rings, 3)
    ring_arcs: dict = field(repr=False)            # seg -> (rings,) mm
    radial: np.ndarray = field(repr=False)         # (N, 3) outward units
    connection: ConnectionElement | None
    r_trunk: float = 0.0
    r_limb: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.vertices)):
            raise ValueError("mesh vertices must be finite")

    @property
    def n_vertices(self):
        return sum(self.seg_rings[s] for s in self.seg_names) * self.n_t

    def seg_offset(self, seg):
        off = 0
        for name in self.seg_names:
            if name == seg:
                return off
            off += self.seg_rings[name] * self.n_t
        raise KeyError(seg)

    def index(self, seg, s, t):
        if not 0 <= s < self.seg_rings[seg]:
            raise IndexError(f"ring {s} out of range for {seg}")
        return self.seg_offset(seg) + s * self.n_t + (t % self.n_t)

    def ring_indices(self, seg, s):
        base = self.seg_offset(seg) + s * self.n_t
        return np.arange(base, base + self.n_t)

    def rings(self):
        for seg in self.seg_names:
            for s in range(self.seg_rings[seg]):
                yield seg, s, self.ring_indices(seg, s)

    def quads(self):
        """Quad faces per tube patch; junction left open."""
        faces = []
        for seg in self.seg_names:
            for s in range(self.seg_rings[seg] - 1):
                for t in range(self.n_t):
                    faces.append((
                        self.index(seg, s, t),
                        self.index(seg, s + 1, t),
                        self.index(seg, s + 1, t + 1),
                        self.index(seg, s, t + 1),
                    ))
        return faces

    def with_vertices(self, vertices):
        return replace(self, vertices=np.asarray(vertices, dtype=np.float64))

    def nominal_radius(self, seg):
        return self.r_trunk if seg == "trunk" else self.r_limb


def _build_rings(curve: Curve, arcs, r0, n_t, normal0=None):
    centers = np.array([curve.point_at(s) for s in arcs])
    tangents = np.array([curve.tangent_at(s) for s in arcs])
    if normal0 is None:
        normal0 = _initial_normal(tangents[0])
    normals = rotation_minimizing_frames(centers, tangents, normal0)
    theta = 2.0 * np.pi * np.arange(n_t) / n_t
    verts = []
    radial = []
    for c, t, e1 in zip(centers, tangents, normals):
        e2 = np.cross(t, e1)
        e2 /= np.linalg.norm(e2)
        u = np.outer(np.cos(theta), e1) + np.outer(np.sin(theta), e2)
        verts.append(c[None, :] + r0 * u)
        radial.append(u)
    return centers, np.vstack(verts), np.vstack(radial), normals[-1]


def build_tube_stent(points, r0, n_t, rings) -> StentMesh:
    """Single straight-through tube (no bifurcation); used for cylindrical
    vessels and as the elementary grid for solver verification."""
    if r0 <= 0:
        raise RadiusNonPositive("tube radius must be > 0")
    _check_nt(n_t)
    if rings < 2:
        raise CenterlineTooShort("need at least two rings")
    curve = Curve(points)
    arcs = np.linspace(0.0, curve.length, rings)
    centers, verts, radial, _ = _build_rings(curve, arcs, r0, n_t)
    return StentMesh(
        n_t=n_t, seg_names=("trunk",), seg_rings={"trunk": rings},
        vertices=verts, ring_centers={"trunk": centers},
        ring_arcs={"trunk": arcs}, radial=radial, connection=None,
        r_trunk=r0, r_limb=r0,
    )


def _check_nt(n_t):
    if n_t < 8 or n_t % 2 != 0:
        raise ValueError("n_t must be even and >= 8")


def build_initial_stent(cl: CenterlineSet, r0_trunk, r0_limb, n_t,
                        trunk_rings, limb_rings) -> StentMesh:
    """Construct the initial bifurcated stent along the centerline set.

    Rings sit at uniform arc length per segment, oriented by
    rotation-minimizing transport; the limbs inherit the trunk's final frame
    so there is no twist discontinuity across the junction. The first limb
    ring is offset one ring spacing from the bifurcation.
    """
    if r0_trunk <= 0 or r0_limb <= 0:
        raise RadiusNonPositive("stent radii must be > 0")
    _check_nt(n_t)
    if trunk_rings < 2 or limb_rings < 2:
        raise CenterlineTooShort("need at least two rings per segment")
    if len(cl.left_limb) < 2 or len(cl.right_limb) < 2:
        raise CenterlineTooShort("limb centerlines are too short")

    trunk_curve = Curve(cl.trunk)
    arcs_t = np.linspace(0.0, trunk_curve.length, trunk_rings)
    centers_t, verts_t, rad_t, trunk_final_normal = _build_rings(
        trunk_curve, arcs_t, r0_trunk, n_t)

    seg_names = ("trunk", "left", "right")
    all_verts = [verts_t]
    all_radial = [rad_t]
    ring_centers = {"trunk": centers_t}
    ring_arcs = {"trunk": arcs_t}
    for name, pts in (("left", cl.left_limb), ("right", cl.right_limb)):
        curve = Curve(pts)
        arcs = np.linspace(curve.length / limb_rings, curve.length, limb_rings)
        t0 = curve.tangent_at(arcs[0])
        n0 = trunk_final_normal - (trunk_final_normal @ t0) * t0
        nn = np.linalg.norm(n0)
        n0 = n0 / nn if nn > 1e-8 else _initial_normal(t0)
        centers, verts, radial, _ = _build_rings(curve, arcs, r0_limb, n_t, n0)
        all_verts.append(verts)
        all_radial.append(radial)
        ring_centers[name] = centers
        ring_arcs[name] = arcs

    mapping = {}
    for limb in ("left", "right"):
        for k in (1, 2):
            for t in range(n_t):
                mapping[(limb, -k, t)] = ("trunk", trunk_rings - k, t)
    for k in (0, 1):
        for t in range(n_t):
            target = "right" if t < n_t // 2 else "left"
            mapping[("trunk", trunk_rings + k, t)] = (target, k, t)

    return StentMesh(
        n_t=n_t, seg_names=seg_names,
        seg_rings={"trunk": trunk_rings, "left": limb_rings, "right": limb_rings},
        vertices=np.vstack(all_verts),
        ring_centers=ring_centers, ring_arcs=ring_arcs,
        radial=np.vstack(all_radial),
        connection=ConnectionElement(mapping),
        r_trunk=r0_trunk, r_limb=r0_limb,
    )


@dataclass(frozen=True)
class StencilTable:
    """Per-vertex neighbor indices driving all derivative stencils.

    -1 marks a free (one-sided) boundary in s; t wraps periodically.
    Junction neighbors are resolved through the connection element.
    """

    n: int
    s_prev: np.ndarray = field(repr=False)
    s_next: np.ndarray = field(repr=False)
    t_prev: np.ndarray = field(repr=False)
    t_next: np.ndarray = field(repr=False)

    def s_edges(self):
        pairs = set()
        for i in range(self.n):
            for j in (self.s_prev[i], self.s_next[i]):
                if j >= 0:
                    pairs.add((min(i, j), max(i, j)))
        return sorted(pairs)

    def t_edges(self):
        pairs = set()
        for i in range(self.n):
            j = self.t_next[i]
            pairs.add((min(i, j), max(i, j)))
        return sorted(pairs)

    def plaquettes(self):
        """Mixed-derivative cells: (a, b, t_next[a], t_next[b]) per s-edge."""
        return [(a, b, int(self.t_next[a]), int(self.t_next[b]))
                for a, b in self.s_edges()]

    # stencil views used by verification
    def d2_ds2(self, i):
        """(coeff, index) pairs of the centered second difference in s."""
        p, q = int(self.s_prev[i]), int(self.s_next[i])
        if p < 0 or q < 0:
            return None
        return [(1.0, p), (-2.0, i), (1.0, q)]

    def d_dt(self, i):
        return [(-0.5, int(self.t_prev[i])), (0.5, int(self.t_next[i]))]


def derivative_stencils(mesh: StentMesh) -> StencilTable:
    n = mesh.n_vertices
    s_prev = np.full(n, -1, dtype=np.int64)
    s_next = np.full(n, -1, dtype=np.int64)
    t_prev = np.empty(n, dtype=np.int64)
    t_next = np.empty(n, dtype=np.int64)
    for seg in mesh.seg_names:
        rings = mesh.seg_rings[seg]
        for s in range(rings):
            for t in range(mesh.n_t):
                i = mesh.index(seg, s, t)
                t_prev[i] = mesh.index(seg, s, t - 1)
                t_next[i] = mesh.index(seg, s, t + 1)
                if s > 0:
                    s_prev[i] = mesh.index(seg, s - 1, t)
                if s < rings - 1:
                    s_next[i] = mesh.index(seg, s + 1, t)
    if mesh.connection is not None:
        for seg in mesh.seg_names:
            rings = mesh.seg_rings[seg]
            for t in range(mesh.n_t):
                if seg == "trunk":
                    tgt = mesh.connection.resolve((seg, rings, t))
                    s_next[mesh.index(seg, rings - 1, t)] = _resolve_index(mesh, tgt)
                else:
                    tgt = mesh.connection.resolve((seg, -1, t))
                    s_prev[mesh.index(seg, 0, t)] = _resolve_index(mesh, tgt)
    return StencilTable(n=n, s_prev=s_prev, s_next=s_next,
                        t_prev=t_prev, t_next=t_next)


def _resolve_index(mesh, tgt):
    seg, s, t = tgt
    if seg not in mesh.seg_rings or not 0 <= s < mesh.seg_rings[seg]:
        raise InvalidConnection(f"connection target {tgt} is not a real vertex")
    return mesh.index(seg, s, t)


def export_mesh(mesh: StentMesh, path):
    """Deterministic ASCII OBJ export: vertex lines plus quad faces per tube."""
    lines = []
    for v in mesh.vertices:
        lines.append("v %.9f %.9f %.9f" % (v[0], v[1], v[2]))
    for f in mesh.quads():
        lines.append("f %d %d %d %d" % tuple(i + 1 for i in f))
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as e:
        raise IoFailure(str(e)) from e


def mesh_to_dict(mesh: StentMesh) -> dict:
    return {
        "n_t": mesh.n_t,
        "seg_names": list(mesh.seg_names),
        "seg_rings": dict(mesh.seg_rings),
        "vertices": mesh.vertices.tolist(),
        "ring_centers": {k: np.asarray(v).tolist() for k, v in mesh.ring_centers.items()},
        "ring_arcs": {k: np.asarray(v).tolist() for k, v in mesh.ring_arcs.items()},
        "radial": mesh.radial.tolist(),
        "connection": None if mesh.connection is None else [
            [list(k), list(v)] for k, v in sorted(mesh.connection.mapping.items())
        ],
        "r_trunk": mesh.r_trunk,
        "r_limb": mesh.r_limb,
    }


def mesh_from_dict(d) -> StentMesh:
    conn = d.get("connection")
    mapping = None
    if conn is not None:
        mapping = ConnectionElement({
            (k[0], int(k[1]), int(k[2])): (v[0], int(v[1]), int(v[2]))
            for k, v in conn
        })
    return StentMesh(
        n_t=int(d["n_t"]),
        seg_names=tuple(d["seg_names"]),
        seg_rings={k: int(v) for k, v in d["seg_rings"].items()},
        vertices=np.asarray(d["vertices"], dtype=np.float64),
        ring_centers={k: np.asarray(v) for k, v in d["ring_centers"].items()},
        ring_arcs={k: np.asarray(v) for k, v in d["ring_arcs"].items()},
        radial=np.asarray(d["radial"], dtype=np.float64),
        connection=mapping,
        r_trunk=float(d["r_trunk"]),
        r_limb=float(d["r_limb"]),
    )
