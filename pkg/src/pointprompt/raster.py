"""Pixel-level primitives.

Images are ``(H, W, 3)`` uint8 arrays and masks are ``(H, W)`` bool arrays,
both indexed ``[y, x]`` with the origin at the top-left. Points are ``(x, y)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numba
import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import EmptyRegion, InvalidKernelSpec, OutOfBounds

# compass steps for directions 0..7, counterclockwise from east, y grows downward
COMPASS = ((1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1))

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class Point(NamedTuple):
    x: int
    y: int


def as_mask(mask) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.size == 0:
        raise ValueError(f"mask must be a non-empty 2-D array, got shape {mask.shape}")
    return mask.astype(bool, copy=False)


def as_image(image) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8 or image.size == 0:
        raise ValueError(f"image must be a non-empty (H, W, 3) uint8 array, got {image.dtype} {image.shape}")
    return image


def check_in_bounds(p, shape) -> Point:
    x, y = int(p[0]), int(p[1])
    h, w = shape[:2]
    if not (0 <= x < w and 0 <= y < h):
        raise OutOfBounds(f"point ({x}, {y}) outside {w}x{h} raster")
    return Point(x, y)


# ---------------------------------------------------------------- I/O

def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.array(im.convert("RGB"), dtype=np.uint8)


def save_image(path, image) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(as_image(image), mode="RGB").save(path, format="PNG")


def load_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.array(im.convert("L")) > 0


def save_mask(path, mask) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    data = as_mask(mask).astype(np.uint8) * 255
    Image.fromarray(data, mode="L").save(path, format="PNG")


def load_label_map(path) -> np.ndarray:
    """Raw palette indices (or gray levels) of a label-map PNG."""
    with Image.open(path) as im:
        if im.mode not in ("P", "L", "I", "I;16"):
            im = im.convert("L")
        return np.array(im)


# ---------------------------------------------------------------- distance transform

@numba.njit(cache=True)
def _lower_envelope(f, out, v, z):
    # exact 1-D squared distance over sampled function f (Felzenszwalb & Huttenlocher)
    n = f.shape[0]
    inf = np.inf
    k = 0
    v[0] = 0
    z[0] = -inf
    z[1] = inf
    for q in range(1, n):
        if f[q] == inf:
            continue
        if f[v[k]] == inf:
            v[k] = q
            continue
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = inf
    if f[v[0]] == inf:
        for q in range(n):
            out[q] = inf
        return
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d = q - v[k]
        out[q] = d * d + f[v[k]]


@numba.njit(cache=True)
def _edt_sq(bg):
    h, w = bg.shape
    inf = np.inf
    n = max(h, w)
    f = np.empty(n)
    out = np.empty(n)
    v = np.empty(n, dtype=np.int64)
    z = np.empty(n + 1)
    grid = np.empty((h, w))
    for x in range(w):
        for y in range(h):
            f[y] = 0.0 if bg[y, x] else inf
        _lower_envelope(f[:h], out[:h], v, z)
        for y in range(h):
            grid[y, x] = out[y]
    res = np.empty((h, w), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            f[x] = grid[y, x]
        _lower_envelope(f[:w], out[:w], v, z)
        for x in range(w):
            res[y, x] = np.int64(out[x])
    return res


def distance_transform(mask) -> np.ndarray:
    """Exact squared Euclidean distance from each foreground pixel to the nearest
    background pixel, as int64. Pixels beyond the image border count as background."""
    mask = as_mask(mask)
    if not mask.any():
        return np.zeros(mask.shape, dtype=np.int64)
    bg = np.pad(~mask, 1, constant_values=True)
    return _edt_sq(bg)[1:-1, 1:-1].copy()


def argmax_distance(field) -> Point:
    """Pixel with the largest distance; ties go to the first in row-major order."""
    field = np.asarray(field)
    idx = int(np.argmax(field))
    if field.flat[idx] <= 0:
        raise EmptyRegion("distance field has no positive value")
    y, x = divmod(idx, field.shape[1])
    return Point(x, y)


# ---------------------------------------------------------------- morphology

@dataclass(frozen=True)
class StructuringElement:
    size: int
    direction: int
    offsets: tuple[tuple[int, int], ...]


def make_kernel(size: int, direction: int) -> StructuringElement:
    """Anchor plus a ray of ``size // 2`` steps along compass ``direction``."""
    if isinstance(size, bool) or int(size) != size or size < 1 or size % 2 == 0:
        raise InvalidKernelSpec(f"kernel size must be an odd integer >= 1, got {size!r}")
    if isinstance(direction, bool) or int(direction) != direction or not 0 <= direction <= 7:
        raise InvalidKernelSpec(f"direction must be an integer in [0, 7], got {direction!r}")
    dx, dy = COMPASS[direction]
    offsets = tuple((i * dx, i * dy) for i in range(size // 2 + 1))
    return StructuringElement(int(size), int(direction), offsets)


def _shifted_or(out, mask, dx, dy):
    h, w = mask.shape
    if abs(dx) >= w or abs(dy) >= h:
        return
    src = mask[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)]
    dst = out[max(0, dy):h - max(0, -dy), max(0, dx):w - max(0, -dx)]
    dst |= src


def dilate(mask, kernel) -> np.ndarray:
    """Minkowski dilation by the kernel offsets, clipped to the image."""
    mask = as_mask(mask)
    offsets = kernel.offsets if isinstance(kernel, StructuringElement) else kernel
    out = np.zeros_like(mask)
    for dx, dy in offsets:
        _shifted_or(out, mask, int(dx), int(dy))
    return out


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    radius = math.ceil(3 * sigma)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (t / sigma) ** 2)
    return k / k.sum()


def gaussian_blur_threshold(mask, sigma: float = 2.0, threshold: float = 0.5) -> np.ndarray:
    """Zero-padded Gaussian blur of the 0/1 mask, re-binarized at ``threshold``."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    mask = as_mask(mask)
    k = gaussian_kernel1d(sigma)
    blurred = ndimage.correlate1d(mask.astype(np.float64), k, axis=0, mode="constant")
    blurred = ndimage.correlate1d(blurred, k, axis=1, mode="constant")
    return blurred >= threshold


# ---------------------------------------------------------------- components

def connected_component(mask, seed) -> np.ndarray:
    """8-connected foreground component containing ``seed``; empty if seed is background."""
    mask = as_mask(mask)
    x, y = check_in_bounds(seed, mask.shape)
    if not mask[y, x]:
        return np.zeros_like(mask)
    labels, _ = ndimage.label(mask, structure=EIGHT_CONNECTED)
    return labels == labels[y, x]


def label_components(mask):
    """All 8-connected components as ``(labels, count)``."""
    return ndimage.label(as_mask(mask), structure=EIGHT_CONNECTED)
