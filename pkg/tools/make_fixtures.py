"""Regenerate the committed deterministic test fixtures.

Run from the repository root:  python3 tools/make_fixtures.py
"""

import os

from stentfit.phantom import PhantomSpec, phantom_generate
from stentfit.volume import save_volume

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")

# Straight-tube phantom in a 64^3 volume, 1 mm spacing, lumen radius 8 mm.
# The trunk axis is pinned to the voxel-center column x = y = 32.5 so the
# thinning skeleton stays a clean single path (an axis between voxel centers
# thins to a degenerate zig-zag).
CYLINDER = PhantomSpec(
    trunk_radius=8.0, trunk_length=44.0,
    aneurysm_peak_radius=8.0, aneurysm_center=22.0, aneurysm_width=5.0,
    distal_neck_radius=8.0,
    limb_radius=1.0, limb_length=0.0, limb_half_angle=0.0,
)


def main():
    os.makedirs(FIXTURES, exist_ok=True)
    vol, truth = phantom_generate(CYLINDER, dims=(64, 64, 64),
                                  spacing=(1.0, 1.0, 1.0),
                                  axis_xy=(32.5, 32.5))
    base = os.path.join(FIXTURES, "cylinder64")
    save_volume(vol, base)
    truth.save(base + "_truth.json")
    print(f"wrote {base}.svh/.svr and {base}_truth.json")


if __name__ == "__main__":
    main()
