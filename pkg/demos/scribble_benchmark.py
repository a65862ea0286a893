"""
Degraded region prompts
=======================

Robustness benchmarks replace exact annotations with sloppy ones. Masks are
regrown as scribbles from a random seed pixel; boxes are shrunk to a tenth of
their area at a random position inside the original.
"""
from pathlib import Path

import numpy as np

from pointprompt import BBox, BoxShrinkParams, ScribbleParams, degrade_box, degrade_mask
from pointprompt.raster import save_mask

out = Path("demo_output")

yy, xx = np.mgrid[:96, :96]
gt = (xx - 48) ** 2 / 40 ** 2 + (yy - 48) ** 2 / 28 ** 2 <= 1

# more dilation steps give larger scribbles
for T in (5, 20, 40):
    areas = [degrade_mask(gt, ScribbleParams(iterations=T, seed=s)).sum() for s in range(30)]
    print(f"T={T:2d}: mean scribble covers {np.mean(areas) / gt.sum():.1%} of the mask")

strip = np.concatenate([degrade_mask(gt, ScribbleParams(seed=s)) for s in range(4)], axis=1)
save_mask(out / "scribbles.png", strip)

# the same seed always gives the same box
box = BBox(10, 20, 120, 80)
for seed in range(3):
    small = degrade_box(box, BoxShrinkParams(0.10, seed))
    print(seed, small, f"area ratio {small.area / box.area:.3f}", "inside:", box.contains(small))
