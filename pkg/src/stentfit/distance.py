"""Exact Euclidean distance transform of the lumen mask and its gradient.

Zero on inside voxels; outside voxels carry the minimum Euclidean distance
(mm, anisotropic spacing respected) to any inside voxel center. Computed by
the separable squared-distance lower-envelope algorithm, exact in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import EmptyMask, OutOfBounds
from .volume import BinaryMask, VoxelVolume, sample_trilinear

_INF = 1e30


@njit(cache=True)
def _envelope_1d(f, h, d, v, z):
    """1D squared-distance transform along one axis with grid step h.

    f: input squared distances, d: output, v/z: work arrays.
    """
    n = f.shape[0]
    q0 = -1
    for q in range(n):
        if f[q] < _INF:
            q0 = q
            break
    if q0 < 0:
        for q in range(n):
            d[q] = _INF
        return
    k = 0
    v[0] = q0
    z[0] = -_INF
    z[1] = _INF
    for q in range(q0 + 1, n):
        if f[q] >= _INF:
            continue
        while True:
            p = v[k]
            s = ((f[q] + (q * h) ** 2) - (f[p] + (p * h) ** 2)) / (2.0 * h * (q - p))
            if s <= z[k]:
                k -= 1
                continue
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = _INF
            break
    k = 0
    for q in range(n):
        x = q * h
        while z[k + 1] < x:
            k += 1
        p = v[k]
        d[q] = (x - p * h) ** 2 + f[p]


@njit(cache=True)
def _edt_sq(mask, sx, sy, sz):
    nx, ny, nz = mask.shape
    g = np.empty((nx, ny, nz), dtype=np.float64)
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                g[i, j, k] = 0.0 if mask[i, j, k] else _INF
    nmax = max(nx, max(ny, nz))
    d = np.empty(nmax, dtype=np.float64)
    v = np.empty(nmax + 1, dtype=np.int64)
    z = np.empty(nmax + 2, dtype=np.float64)
    f = np.empty(nmax, dtype=np.float64)
    # x pass
    for j in range(ny):
        for k in range(nz):
            for i in range(nx):
                f[i] = g[i, j, k]
            _envelope_1d(f[:nx], sx, d[:nx], v, z)
            for i in range(nx):
                g[i, j, k] = d[i]
    # y pass
    for i in range(nx):
        for k in range(nz):
            for j in range(ny):
                f[j] = g[i, j, k]
            _envelope_1d(f[:ny], sy, d[:ny], v, z)
            for j in range(ny):
                g[i, j, k] = d[j]
    # z pass
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                f[k] = g[i, j, k]
            _envelope_1d(f[:nz], sz, d[:nz], v, z)
            for k in range(nz):
                g[i, j, k] = d[k]
    return g


@dataclass(frozen=True)
class DistanceField:
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]
    data: np.ndarray = field(repr=False)  # mm, float64

    def as_volume(self) -> VoxelVolume:
        return VoxelVolume(dims=self.dims, spacing=self.spacing,
                           origin=self.origin, data=self.data.astype(np.float32))


def edt(mask: BinaryMask) -> DistanceField:
    """Exact Euclidean distance transform of the mask (voxel-center metric)."""
    if mask.count == 0:
        raise EmptyMask("cannot transform an empty mask")
    g = _edt_sq(np.ascontiguousarray(mask.bits), *mask.spacing)
    return DistanceField(dims=mask.dims, spacing=mask.spacing,
                         origin=mask.origin, data=np.sqrt(g))


def wall_field(mask: BinaryMask, surface_offset: float | None = None
               ) -> DistanceField:
    """Distance field for wall forces: edt shifted half a voxel outward.

    The discrete transform is zero at lumen voxel centers, so its
    interpolated ramp begins half a voxel inside the actual lumen surface;
    the clamped subtraction moves the ramp base onto the surface so the
    simulated stent equilibrates at the wall instead of inside it.
    """
    fld = edt(mask)
    if surface_offset is None:
        surface_offset = 0.5 * float(np.mean(mask.spacing))
    return DistanceField(dims=fld.dims, spacing=fld.spacing, origin=fld.origin,
                         data=np.maximum(fld.data - surface_offset, 0.0))


def grad_d(fld: DistanceField, p):
    """Central-difference gradient of the trilinearly sampled field.

    h = min spacing component. p may be (3,) or (N, 3); points must be at
    least one voxel from the volume border.
    """
    pts = np.atleast_2d(np.asarray(p, dtype=np.float64))
    h = min(fld.spacing)
    lo = np.asarray(fld.origin) + 0.5 * np.asarray(fld.spacing) + h
    hi = (np.asarray(fld.origin)
          + (np.asarray(fld.dims) - 0.5) * np.asarray(fld.spacing) - h)
    if np.any(pts < lo - 1e-12) or np.any(pts > hi + 1e-12):
        raise OutOfBounds("gradient query too close to the volume border")
    out = np.empty_like(pts)
    for a in range(3):
        dp = np.zeros(3)
        dp[a] = h
        out[:, a] = (sample_trilinear(fld, pts + dp)
                     - sample_trilinear(fld, pts - dp)) / (2.0 * h)
    if np.asarray(p).ndim == 1:
        return out[0]
    return out
