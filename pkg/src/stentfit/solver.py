"""Semi-implicit deformable-surface solver for the bifurcated stent.

One sparse symmetric stiffness matrix couples all three tube patches; its
shifted factorization is computed once and reused for every iteration and
coordinate axis. External forces (vessel-wall distance field + capped
balloon inflation) are evaluated explicitly each step.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import factorized

from .distance import DistanceField, grad_d
from .errors import NonFiniteState, OutOfBounds, SingularSystem
from .stent import StentMesh, StencilTable, derivative_stencils
from .volume import sample_trilinear


@dataclass(frozen=True)
class SolverParams:
    R_trunk: float
    R_limb: float
    w1: float = 1.0        # first derivative along the tube
    w2: float = 1.0        # first derivative around the tube
    w3: float = 0.1        # bending along the tube
    w4: float = 0.1        # bending around the tube
    w5: float = 0.1        # mixed/diagonal term
    w_vesselWall: float = 1.0
    w_balloon: float = 1.0
    F_pressure: float = 0.5
    gamma: float = 1.0
    max_iterations: int = 100
    convergence_eps: float = 1e-3  # mm
    # cap on the balloon lever arm (R - r), mm; infinite reproduces the pure
    # linear inflation law. Measurement mode caps it so the near-wall push is
    # uniform across lumen calibers instead of growing with R - r_wall.
    balloon_saturation: float = float("inf")
    # measurement mode: constrain every vertex to its initial ring plane so
    # rings report the caliber at their arc station; with the internal
    # weights scaled to ~0 nothing else stops rings from sliding along the
    # tube into wider lumen sections
    plane_lock: bool = False

    def __post_init__(self):
        for name in ("w1", "w2", "w3", "w4", "w5", "w_vesselWall",
                     "w_balloon", "F_pressure"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0")
        if self.gamma <= 0:
            raise SingularSystem("gamma must be > 0")
        if not self.balloon_saturation > 0:
            raise ValueError("balloon_saturation must be > 0")

    def to_dict(self):
        d = {k: getattr(self, k) for k in (
            "w1", "w2", "w3", "w4", "w5", "w_vesselWall", "w_balloon",
            "F_pressure", "R_trunk", "R_limb", "gamma", "max_iterations",
            "convergence_eps")}
        if np.isfinite(self.balloon_saturation):
            d["balloon_saturation"] = self.balloon_saturation
        d["plane_lock"] = self.plane_lock
        return d


def expansion_mode(params: SolverParams, lumen_radius_hint: float) -> SolverParams:
    """Measurement configuration: internal weights scaled down by 1e-3 and
    the limit radii raised well above the lumen so the surface expands to
    the vessel wall. The balloon lever arm is saturated at 2 mm so the push
    at the wall is the same for narrow limbs and wide aneurysm sections."""
    big_r = max(1.5 * lumen_radius_hint, params.R_trunk, params.R_limb)
    return replace(
        params,
        w1=params.w1 * 1e-3, w2=params.w2 * 1e-3, w3=params.w3 * 1e-3,
        w4=params.w4 * 1e-3, w5=params.w5 * 1e-3,
        R_trunk=big_r, R_limb=big_r,
        balloon_saturation=min(params.balloon_saturation, 2.0),
        plane_lock=True,
    )


@dataclass(frozen=True)
class StiffnessSystem:
    matrix: sparse.csr_matrix = field(repr=False)
    solve: object = field(repr=False)  # callable: rhs -> solution of (A+gamma I)x=rhs
    gamma: float
    params: SolverParams
    factor_seconds: float


def _incidence(rows, n):
    """Sparse difference operator: one (+1, -1) row per vertex pair."""
    m = len(rows)
    data = np.empty(2 * m)
    ri = np.empty(2 * m, dtype=np.int64)
    ci = np.empty(2 * m, dtype=np.int64)
    for k, (a, b) in enumerate(rows):
        ri[2 * k] = k
        ci[2 * k] = a
        data[2 * k] = -1.0
        ri[2 * k + 1] = k
        ci[2 * k + 1] = b
        data[2 * k + 1] = 1.0
    return sparse.csr_matrix((data, (ri, ci)), shape=(m, n))


def _plaquette_op(plaquettes, n):
    m = len(plaquettes)
    data = np.empty(4 * m)
    ri = np.empty(4 * m, dtype=np.int64)
    ci = np.empty(4 * m, dtype=np.int64)
    for k, (a, b, ta, tb) in enumerate(plaquettes):
        for pos, (idx, c) in enumerate(((a, 1.0), (b, -1.0), (ta, -1.0), (tb, 1.0))):
            ri[4 * k + pos] = k
            ci[4 * k + pos] = idx
            data[4 * k + pos] = c
    return sparse.csr_matrix((data, (ri, ci)), shape=(m, n))


def stiffness_operators(table: StencilTable):
    """First differences along/around the tube and the mixed-cell operator."""
    n = table.n
    d_s = _incidence(table.s_edges(), n)
    d_t = _incidence(table.t_edges(), n)
    p = _plaquette_op(table.plaquettes(), n)
    return d_s, d_t, p


def assemble_stiffness(mesh: StentMesh, params: SolverParams,
                       table: StencilTable | None = None) -> StiffnessSystem:
    """A = sum of D^T w D over the five energy terms; factorize (A + gamma I).

    The mixed term enters with the factor 2 of its variational derivative.
    """
    if table is None:
        table = derivative_stencils(mesh)
    d_s, d_t, p = stiffness_operators(table)
    l_s = (d_s.T @ d_s).tocsr()
    l_t = (d_t.T @ d_t).tocsr()
    a = (params.w1 * l_s
         + params.w2 * l_t
         + params.w3 * (l_s.T @ l_s)
         + params.w4 * (l_t.T @ l_t)
         + 2.0 * params.w5 * (p.T @ p))
    a = ((a + a.T) * 0.5).tocsr()
    n = table.n
    m = (a + params.gamma * sparse.identity(n, format="csr")).tocsc()
    t0 = time.perf_counter()
    solve = factorized(m)
    dt = time.perf_counter() - t0
    return StiffnessSystem(matrix=a, solve=solve, gamma=params.gamma,
                           params=params, factor_seconds=dt)


def internal_energy(system: StiffnessSystem, vertices) -> float:
    v = np.asarray(vertices)
    return float(sum(v[:, c] @ (system.matrix @ v[:, c]) for c in range(3)))


def balloon_force(vertex, center, radial_unit, params: SolverParams, limit_radius):
    """Capped inflation: F_pressure * (R - r) outward while r < R, else 0."""
    v = np.asarray(vertex, dtype=np.float64)
    r = float(np.linalg.norm(v - np.asarray(center)))
    if r >= limit_radius:
        return np.zeros(3)
    gap = min(limit_radius - r, params.balloon_saturation)
    return params.F_pressure * gap * np.asarray(radial_unit)


def external_force(vertex, center, radial_unit, fld: DistanceField,
                   params: SolverParams, limit_radius):
    """Wall restoring force -w_vesselWall * grad D plus weighted balloon."""
    f = -params.w_vesselWall * grad_d(fld, vertex) if params.w_vesselWall > 0 \
        else np.zeros(3)
    if params.w_balloon > 0:
        f = f + params.w_balloon * balloon_force(
            vertex, center, radial_unit, params, limit_radius)
    return f


def step(vertices, system: StiffnessSystem, forces):
    """Semi-implicit update per axis: v+ = (A + gamma I)^-1 (gamma v + f)."""
    v = np.asarray(vertices, dtype=np.float64)
    f = np.asarray(forces, dtype=np.float64)
    out = np.empty_like(v)
    for c in range(3):
        out[:, c] = system.solve(system.gamma * v[:, c] + f[:, c])
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("non-finite vertex coordinates after solve")
    return out


@dataclass
class SimulationTrace:
    internal: list = field(default_factory=list)
    external: list = field(default_factory=list)
    max_disp: list = field(default_factory=list)
    iter_seconds: list = field(default_factory=list)
    factor_seconds: float = 0.0

    def __len__(self):
        return len(self.max_disp)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "E_int", "E_ext", "max_disp"])
            for i in range(len(self.max_disp)):
                w.writerow([i, repr(self.internal[i]), repr(self.external[i]),
                            repr(self.max_disp[i])])


def _ring_anchor_state(mesh: StentMesh, vertices):
    """Per-vertex ring centroid, radius and outward unit."""
    centers = np.empty_like(vertices)
    for _, _, idx in mesh.rings():
        centers[idx] = vertices[idx].mean(axis=0)
    delta = vertices - centers
    r = np.linalg.norm(delta, axis=1)
    u = np.zeros_like(delta)
    ok = r > 1e-12
    u[ok] = delta[ok] / r[ok, None]
    return centers, r, u


def _ring_planes(mesh: StentMesh, window_mm: float = 4.0):
    """Per-vertex anchor point and unit normal of each ring's initial plane.

    The normal is the chord direction of the initial ring-center polyline
    over +-window_mm of arc; local differences would inherit small hooks of
    the extracted centerline tips and tilt the end planes by >15 degrees.
    """
    anchors = np.empty((mesh.n_vertices, 3))
    normals = np.empty((mesh.n_vertices, 3))
    for seg in mesh.seg_names:
        pts = np.asarray(mesh.ring_centers[seg], dtype=np.float64)
        arcs = np.asarray(mesh.ring_arcs[seg], dtype=np.float64)
        n = len(pts)
        step = (arcs[-1] - arcs[0]) / max(n - 1, 1) if n > 1 else 1.0
        k = max(1, int(round(window_mm / max(step, 1e-9))))
        for s in range(mesh.seg_rings[seg]):
            # End rings take the chord of the nearest ring with a full
            # two-sided window, so a short hook at a polyline tip cannot
            # tilt them.
            c = min(max(s, k), n - 1 - k) if n - 1 >= 2 * k else (n - 1) // 2
            lo, hi = max(c - k, 0), min(c + k, n - 1)
            t = pts[hi] - pts[lo]
            norm = np.linalg.norm(t)
            if norm > 1e-12:
                t = t / norm
            idx = mesh.ring_indices(seg, s)
            anchors[idx] = pts[s]
            normals[idx] = t
    return anchors, normals


def _limit_radii(mesh: StentMesh, params: SolverParams):
    lim = np.empty(mesh.n_vertices)
    for seg, s, idx in mesh.rings():
        lim[idx] = params.R_trunk if seg == "trunk" else params.R_limb
    return lim


def run(mesh: StentMesh, fld: DistanceField | None, params: SolverParams,
        system: StiffnessSystem | None = None):
    """Iterate the semi-implicit update with per-iteration ring-anchor
    refresh until max displacement < convergence_eps or the iteration
    budget runs out. Returns (deformed mesh, trace)."""
    if system is None:
        system = assemble_stiffness(mesh, params)
    verts = mesh.vertices.astype(np.float64).copy()
    lim = _limit_radii(mesh, params)
    plane_anchor = plane_normal = None
    if params.plane_lock:
        plane_anchor, plane_normal = _ring_planes(mesh)
    trace = SimulationTrace(factor_seconds=system.factor_seconds)
    for it in range(params.max_iterations):
        t0 = time.perf_counter()
        centers, r, u = _ring_anchor_state(mesh, verts)
        forces = np.zeros_like(verts)
        e_ext = 0.0
        if params.w_balloon > 0:
            gap = np.minimum(np.maximum(lim - r, 0.0), params.balloon_saturation)
            mag = params.w_balloon * params.F_pressure * gap
            forces += mag[:, None] * u
            e_ext += float(params.w_balloon * 0.5 * params.F_pressure
                           * np.sum(gap ** 2))
        if params.w_vesselWall > 0 and fld is not None:
            try:
                g = grad_d(fld, verts)
                dvals = sample_trilinear(fld, verts)
            except OutOfBounds as e:
                raise OutOfBounds(
                    f"vertex left the volume at iteration {it}: {e}") from e
            if plane_anchor is not None:
                # With rings locked to their planes, project the wall
                # response onto the in-plane radial direction at full
                # gradient magnitude so steep wall slopes (mostly axial
                # gradient) still hold the ring in.
                gmag = np.linalg.norm(g, axis=1)
                forces -= (params.w_vesselWall * gmag)[:, None] * u
            else:
                forces -= params.w_vesselWall * g
            e_ext += float(params.w_vesselWall * np.sum(dvals))
        new = step(verts, system, forces)
        if plane_anchor is not None:
            off_plane = np.sum((new - plane_anchor) * plane_normal, axis=1)
            new -= off_plane[:, None] * plane_normal
        disp = float(np.max(np.linalg.norm(new - verts, axis=1)))
        verts = new
        trace.internal.append(internal_energy(system, verts))
        trace.external.append(e_ext)
        trace.max_disp.append(disp)
        trace.iter_seconds.append(time.perf_counter() - t0)
        if disp < params.convergence_eps:
            break
    return mesh.with_vertices(verts), trace
