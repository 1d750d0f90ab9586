"""Intensity-window region growing from a seed point (6-connectivity)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyMask, SeedOutsideWindow
from .volume import BinaryMask, VoxelVolume

_STRUCT6 = ndimage.generate_binary_structure(3, 1)


@dataclass(frozen=True)
class SeedPoint:
    position: tuple[float, float, float]  # mm


@dataclass(frozen=True)
class IntensityWindow:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("window lower must be <= upper")


def region_grow(vol: VoxelVolume, seed: SeedPoint, window: IntensityWindow) -> BinaryMask:
    """6-connected component of in-window voxels containing the seed voxel."""
    i, j, k = vol.voxel_of_point(seed.position)
    value = float(vol.data[i, j, k])
    if not window.lower <= value <= window.upper:
        raise SeedOutsideWindow(
            f"seed voxel value {value} outside [{window.lower}, {window.upper}]"
        )
    accept = (vol.data >= window.lower) & (vol.data <= window.upper)
    labels, _ = ndimage.label(accept, structure=_STRUCT6)
    bits = labels == labels[i, j, k]
    return BinaryMask(dims=vol.dims, spacing=vol.spacing, origin=vol.origin, bits=bits)


def largest_component_cleanup(mask: BinaryMask) -> BinaryMask:
    """Keep only the largest 6-connected component; ties broken by the
    component containing the smallest linear voxel index (x-fastest)."""
    if mask.count == 0:
        raise EmptyMask("mask has no true voxels")
    labels, n = ndimage.label(mask.bits, structure=_STRUCT6)
    if n == 1:
        return mask
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    best = counts.max()
    candidates = np.flatnonzero(counts == best)
    if len(candidates) == 1:
        keep = candidates[0]
    else:
        # x-fastest linear index is the Fortran ravel order
        cand = {int(c) for c in candidates}
        flat = labels.ravel(order="F")
        first = {}
        for idx, lab in enumerate(flat):
            lab = int(lab)
            if lab in cand and lab not in first:
                first[lab] = idx
                if len(first) == len(cand):
                    break
        keep = min(cand, key=lambda lab: first[lab])
    return BinaryMask(dims=mask.dims, spacing=mask.spacing, origin=mask.origin,
                      bits=labels == keep)
