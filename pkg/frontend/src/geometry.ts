/** Pixel/slice to millimetre conversions for the slice viewer. */

import type { Triple, VolumeHeader } from "./types.js";

/**
 * Convert a click at pixel (i, j) on axial slice k into a millimetre
 * seed point. The voxel (i, j, k) is centred at origin + ((i+0.5)s).
 * Returns null for clicks outside the image, which the viewer ignores.
 */
export function pickSeed(
  header: VolumeHeader,
  i: number,
  j: number,
  k: number,
): Triple | null {
  const [nx, ny, nz] = header.dims;
  if (
    !Number.isInteger(i) ||
    !Number.isInteger(j) ||
    !Number.isInteger(k) ||
    i < 0 ||
    j < 0 ||
    k < 0 ||
    i >= nx ||
    j >= ny ||
    k >= nz
  ) {
    return null;
  }
  const [sx, sy, sz] = header.spacing;
  const [ox, oy, oz] = header.origin;
  return [ox + (i + 0.5) * sx, oy + (j + 0.5) * sy, oz + (k + 0.5) * sz];
}
