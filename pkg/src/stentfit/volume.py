"""Voxel volume container, .svh/.svr file I/O and trilinear sampling.

Physical convention used project-wide: the center of voxel (i, j, k) sits at
origin + ((i + 0.5) * sx, (j + 0.5) * sy, (k + 0.5) * sz).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedHeader, OutOfBounds, SizeMismatch, IoFailure

_HEADER_KEYS = ("dims", "spacing", "origin", "dtype", "data")
_DTYPES = {"float32": np.float32, "uint8": np.uint8}


@dataclass(frozen=True)
class VoxelVolume:
    """Scalar 3D grid with anisotropic spacing (mm).

    data is stored as an (nx, ny, nz) array; the on-disk layout is x-fastest.
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        nx, ny, nz = self.dims
        if any(n <= 0 for n in self.dims):
            raise ValueError("dims must be positive")
        if any(s <= 0 for s in self.spacing):
            raise ValueError("spacing components must be > 0")
        if self.data.shape != (nx, ny, nz):
            if self.data.size != nx * ny * nz:
                raise SizeMismatch(
                    f"data has {self.data.size} elements, expected {nx * ny * nz}"
                )
            object.__setattr__(
                self, "data", self.data.reshape((nx, ny, nz), order="F")
            )
        self.data.setflags(write=False)

    def voxel_center(self, i, j, k):
        return np.array(
            [
                self.origin[0] + (i + 0.5) * self.spacing[0],
                self.origin[1] + (j + 0.5) * self.spacing[1],
                self.origin[2] + (k + 0.5) * self.spacing[2],
            ]
        )

    def centers_grid(self):
        """Arrays of voxel-center coordinates per axis."""
        return tuple(
            self.origin[a] + (np.arange(self.dims[a]) + 0.5) * self.spacing[a]
            for a in range(3)
        )

    def voxel_of_point(self, p) -> tuple[int, int, int]:
        """Voxel containing physical point p (mm). Raises OutOfBounds."""
        idx = []
        for a in range(3):
            i = int(np.floor((p[a] - self.origin[a]) / self.spacing[a]))
            if not 0 <= i < self.dims[a]:
                raise OutOfBounds(f"point {tuple(p)} outside volume")
            idx.append(i)
        return tuple(idx)


@dataclass(frozen=True)
class BinaryMask:
    """Inside/outside labeling sharing the geometry of its source volume."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        nx, ny, nz = self.dims
        if self.bits.shape != (nx, ny, nz):
            if self.bits.size != nx * ny * nz:
                raise SizeMismatch(
                    f"bits has {self.bits.size} elements, expected {nx * ny * nz}"
                )
            object.__setattr__(
                self, "bits", self.bits.reshape((nx, ny, nz), order="F")
            )
        if self.bits.dtype != bool:
            object.__setattr__(self, "bits", self.bits.astype(bool))
        self.bits.setflags(write=False)

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    def same_geometry(self, other) -> bool:
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and self.origin == other.origin
        )


def _format_triple(t):
    return " ".join(repr(float(v)) if isinstance(v, float) else str(v) for v in t)


def _parse_header(path):
    try:
        with open(path, "r") as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise IoFailure(str(e)) from e
    fields = {}
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if ":" not in line:
            raise MalformedHeader(f"bad header line: {line!r}")
        key, _, value = line.partition(":")
        fields[key.strip()] = value.strip()
    for key in _HEADER_KEYS:
        if key not in fields:
            raise MalformedHeader(f"missing header key {key!r}")
    try:
        dims = tuple(int(v) for v in fields["dims"].split())
        spacing = tuple(float(v) for v in fields["spacing"].split())
        origin = tuple(float(v) for v in fields["origin"].split())
    except ValueError as e:
        raise MalformedHeader(str(e)) from e
    if len(dims) != 3 or len(spacing) != 3 or len(origin) != 3:
        raise MalformedHeader("dims/spacing/origin must have three components")
    if fields["dtype"] not in _DTYPES:
        raise MalformedHeader(f"unsupported dtype {fields['dtype']!r}")
    return dims, spacing, origin, fields["dtype"], fields["data"]


def _load_raw(header_path):
    dims, spacing, origin, dtype, data_name = _parse_header(header_path)
    raw_path = os.path.join(os.path.dirname(os.path.abspath(header_path)), data_name)
    try:
        payload = np.fromfile(raw_path, dtype=np.dtype(_DTYPES[dtype]).newbyteorder("<"))
    except OSError as e:
        raise IoFailure(str(e)) from e
    n = dims[0] * dims[1] * dims[2]
    if payload.size != n:
        raise SizeMismatch(f"raw payload has {payload.size} elements, expected {n}")
    arr = payload.astype(_DTYPES[dtype]).reshape(dims, order="F")
    return dims, spacing, origin, dtype, arr


def load_volume(path) -> VoxelVolume:
    """Load a volume from a .svh header (raw payload referenced inside)."""
    dims, spacing, origin, dtype, arr = _load_raw(path)
    if dtype != "float32":
        raise MalformedHeader(f"expected dtype float32 for a volume, got {dtype}")
    return VoxelVolume(dims=dims, spacing=spacing, origin=origin, data=arr)


def load_mask(path) -> BinaryMask:
    """Load a binary mask saved in the volume format with dtype uint8."""
    dims, spacing, origin, dtype, arr = _load_raw(path)
    if dtype != "uint8":
        raise MalformedHeader(f"expected dtype uint8 for a mask, got {dtype}")
    return BinaryMask(dims=dims, spacing=spacing, origin=origin, bits=arr != 0)


def _save_raw(base_path, dims, spacing, origin, dtype, arr):
    base_path = str(base_path)
    if base_path.endswith(".svh"):
        base_path = base_path[:-4]
    name = os.path.basename(base_path)
    header_path = base_path + ".svh"
    raw_path = base_path + ".svr"
    header = "\n".join(
        [
            f"dims: {_format_triple(dims)}",
            f"spacing: {_format_triple(tuple(float(s) for s in spacing))}",
            f"origin: {_format_triple(tuple(float(o) for o in origin))}",
            f"dtype: {dtype}",
            f"data: {name}.svr",
        ]
    )
    try:
        with open(header_path, "w") as fh:
            fh.write(header + "\n")
        payload = np.asarray(arr, dtype=_DTYPES[dtype]).ravel(order="F")
        payload.astype(np.dtype(_DTYPES[dtype]).newbyteorder("<")).tofile(raw_path)
    except OSError as e:
        raise IoFailure(str(e)) from e
    return header_path


def save_volume(vol: VoxelVolume, base_path) -> str:
    """Write <base>.svh + <base>.svr; deterministic bytes for identical input."""
    return _save_raw(base_path, vol.dims, vol.spacing, vol.origin, "float32", vol.data)


def save_mask(mask: BinaryMask, base_path) -> str:
    return _save_raw(
        base_path, mask.dims, mask.spacing, mask.origin, "uint8",
        mask.bits.astype(np.uint8),
    )


def sample_trilinear(vol, p):
    """Trilinearly interpolate the volume at physical points p (mm).

    p may be a single (3,) point or an (N, 3) array. Points must lie inside
    the convex hull of voxel centers.
    """
    data = vol.data  # duck-typed: anything with dims/spacing/origin/data
    pts = np.atleast_2d(np.asarray(p, dtype=np.float64))
    u = (pts - np.asarray(vol.origin)) / np.asarray(vol.spacing) - 0.5
    hi = np.asarray(vol.dims) - 1
    if np.any(u < -1e-12) or np.any(u > hi + 1e-12):
        raise OutOfBounds("sample point outside the voxel-center hull")
    u = np.clip(u, 0.0, hi)
    i0 = np.minimum(np.floor(u).astype(np.intp), np.maximum(hi - 1, 0))
    f = u - i0
    i1 = np.minimum(i0 + 1, hi)
    d = data.astype(np.float64, copy=False)
    c000 = d[i0[:, 0], i0[:, 1], i0[:, 2]]
    c100 = d[i1[:, 0], i0[:, 1], i0[:, 2]]
    c010 = d[i0[:, 0], i1[:, 1], i0[:, 2]]
    c110 = d[i1[:, 0], i1[:, 1], i0[:, 2]]
    c001 = d[i0[:, 0], i0[:, 1], i1[:, 2]]
    c101 = d[i1[:, 0], i0[:, 1], i1[:, 2]]
    c011 = d[i0[:, 0], i1[:, 1], i1[:, 2]]
    c111 = d[i1[:, 0], i1[:, 1], i1[:, 2]]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
    c00 = c000 * (1 - fx) + c100 * fx
    c10 = c010 * (1 - fx) + c110 * fx
    c01 = c001 * (1 - fx) + c101 * fx
    c11 = c011 * (1 - fx) + c111 * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    out = c0 * (1 - fz) + c1 * fz
    if np.asarray(p).ndim == 1:
        return float(out[0])
    return out
