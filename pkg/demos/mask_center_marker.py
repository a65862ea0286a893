"""
Point markers from masks and boxes
==================================

A region is reduced to a single pixel before anything is drawn: boxes use
their centroid, masks use the foreground pixel farthest from the boundary.
For a non-convex shape the centroid can fall outside the object, the
distance-transform centre cannot.
"""
from pathlib import Path

import numpy as np

from pointprompt import BBox, PromptStyle, box_centroid, distance_transform, mask_center, render_marker
from pointprompt.raster import save_image

out = Path("demo_output")

# a C-shaped mask: its bounding-box centre sits in the hollow
h, w = 80, 80
mask = np.zeros((h, w), bool)
mask[10:70, 10:28] = True
mask[10:28, 10:70] = True
mask[52:70, 10:70] = True

ys, xs = np.nonzero(mask)
box = BBox(int(xs.min()), int(ys.min()), int(np.ptp(xs)) + 1, int(np.ptp(ys)) + 1)
print("box centroid:", box_centroid(box), "on mask:", mask[box_centroid(box).y, box_centroid(box).x])

centre = mask_center(mask)
print("mask centre:", centre, "squared distance to background:", distance_transform(mask)[centre.y, centre.x])

# overlay: grey mask, red dot at the mask centre, blue square at the box centroid
image = np.full((h, w, 3), 30, np.uint8)
image[mask] = 140
image = render_marker(image, centre, PromptStyle("dot", "red", 4))
image = render_marker(image, box_centroid(box), PromptStyle("square", "blue", 2))
save_image(out / "mask_center.png", image)

# the four marker shapes with the three colours used for style sweeps
tiles = []
for color in ("red", "green", "blue"):
    row = [render_marker(np.full((24, 24, 3), 255, np.uint8), (12, 12), PromptStyle(shape, color, 8, 3))
           for shape in ("dot", "circle", "square", "cross")]
    tiles.append(np.concatenate(row, axis=1))
save_image(out / "marker_styles.png", np.concatenate(tiles, axis=0))
print("wrote", sorted(p.name for p in out.glob("*.png")))
