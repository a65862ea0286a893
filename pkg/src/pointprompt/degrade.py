"""Synthetic "human-drawn" region prompts for robustness benchmarks.

Two degradations are provided: scribble-like masks grown from a random seed
pixel by random directional dilations, and partial boxes shrunk to a fixed
fraction of the original area at a random position.
"""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import BoxTooSmall, EmptyRegion, PointPromptError, ValidationError
from .geometry import BBox, BoxRegion, MaskRegion, PointRegion, validate_box
from .manifest import Manifest, MaskRef, Region, Sample, annotation_to_dict, safe_name
from .raster import (Point, as_mask, connected_component, dilate, gaussian_blur_threshold,
                     gaussian_kernel1d, make_kernel, save_mask)

SCRIBBLE = "scribble"
PARTIAL_BOX = "box"


@dataclass(frozen=True)
class ScribbleParams:
    kernel_size_cap: int = 5
    iterations: int = 20
    sigma: float = 2.0
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kernel_size_cap < 1:
            raise ValidationError("kernel_size_cap must be >= 1")
        if self.iterations < 0:
            raise ValidationError("iterations must be >= 0")
        if not self.sigma > 0:
            raise ValidationError("sigma must be positive")
        if not 0 < self.threshold < 1:
            raise ValidationError("threshold must lie in (0, 1)")


@dataclass(frozen=True)
class BoxShrinkParams:
    target_area_ratio: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.target_area_ratio <= 1:
            raise ValidationError("target_area_ratio must lie in (0, 1]")


def derive_seed(seed: int, *keys: str) -> int:
    """Stable 64-bit seed from a global seed and string keys."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for k in keys:
        h.update(b"\x00" + str(k).encode())
    return int.from_bytes(h.digest(), "little")


def _grow(mask_shape, start: Point, params: ScribbleParams, rng):
    h, w = mask_shape
    # every reachable pixel and its blur support lie in this window, so cropping is exact
    reach = params.iterations * params.kernel_size_cap + len(gaussian_kernel1d(params.sigma)) // 2
    x0, x1 = max(0, start.x - reach), min(w, start.x + reach + 1)
    y0, y1 = max(0, start.y - reach), min(h, start.y + reach + 1)
    grown = np.zeros((y1 - y0, x1 - x0), dtype=bool)
    grown[start.y - y0, start.x - x0] = True
    for _ in range(params.iterations):
        size = int(rng.integers(0, params.kernel_size_cap + 1)) * 2 + 1
        direction = int(rng.integers(0, 8))
        grown = dilate(grown, make_kernel(size, direction))
    return grown, (slice(y0, y1), slice(x0, x1))


def _draw_start(gt, rng) -> Point:
    ys, xs = np.nonzero(gt)
    if len(xs) == 0:
        raise EmptyRegion("ground-truth mask is empty")
    i = int(rng.integers(len(xs)))
    return Point(int(xs[i]), int(ys[i]))


def scribble_start(gt, seed: int) -> Point:
    """The start pixel :func:`degrade_mask` uses for ``seed``."""
    return _draw_start(as_mask(gt), np.random.default_rng(seed))


def degrade_mask(gt, params: ScribbleParams = ScribbleParams()) -> np.ndarray:
    """Scribble-style sub-mask of ``gt``: grow from a random foreground pixel,
    truncate to ``gt``, smooth, then keep the connected piece holding the start.
    """
    gt = as_mask(gt)
    rng = np.random.default_rng(params.seed)
    start = _draw_start(gt, rng)
    grown, window = _grow(gt.shape, start, params, rng)
    gt_win = gt[window]
    truncated = grown & gt_win
    smooth = gaussian_blur_threshold(truncated, params.sigma, params.threshold) & gt_win
    smooth[start.y - window[0].start, start.x - window[1].start] = True
    local = Point(start.x - window[1].start, start.y - window[0].start)
    out = np.zeros_like(gt)
    out[window] = connected_component(smooth, local)
    return out


def _integer_sides(a: float, b: float, lim_a: int, lim_b: int, target: float) -> tuple[int, int]:
    """Integer sides near real sides ``a x b`` with area close to ``target``.

    The shorter side is rounded first (floor or ceil, whichever gives the
    smaller area error) and the longer one recomputed from the target, so the
    area error is at most about half the shorter side.
    """
    swap = b < a
    if swap:
        a, b, lim_a, lim_b = b, a, lim_b, lim_a
    best = None
    for s in sorted({math.floor(a), math.ceil(a)}, key=lambda v: (abs(v - a), v)):
        s = min(lim_a, max(1, s))
        t = min(lim_b, max(1, round(target / s)))
        err = abs(s * t - target)
        if best is None or err < best[0]:
            best = (err, s, t)
    _, s, t = best
    return (t, s) if swap else (s, t)


def degrade_box(gt: BBox, params: BoxShrinkParams = BoxShrinkParams()) -> BBox:
    """Random sub-box of ``gt`` whose area is ``target_area_ratio`` of the original.

    The width ratio is drawn uniformly from the range that keeps both sides
    between one pixel and the original side, and the height ratio is set so
    the product hits the target; placement is uniform over valid offsets.
    """
    validate_box(gt)
    ratio = params.target_area_ratio
    if gt.area < math.ceil(1 / ratio - 1e-9):
        raise BoxTooSmall(f"box {gt} too small for area ratio {ratio}")
    rng = np.random.default_rng(params.seed)
    lo = max(ratio, 1 / gt.w)
    hi = min(1.0, ratio * gt.h)
    r_w = float(rng.uniform(lo, hi)) if hi > lo else lo
    target = ratio * gt.w * gt.h
    w, h = _integer_sides(r_w * gt.w, target / (r_w * gt.w), gt.w, gt.h, target)
    x = gt.x + int(rng.integers(0, gt.w - w + 1))
    y = gt.y + int(rng.integers(0, gt.h - h + 1))
    return BBox(x, y, w, h)


def _mask_bbox(mask) -> BBox:
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise EmptyRegion("mask is empty")
    return BBox(int(xs.min()), int(ys.min()), int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))


def _degrade_region(manifest: Manifest, sample: Sample, region: Region, mode, params,
                    out_dir: Path, shape) -> Region:
    seed = derive_seed(params.seed, sample.id, region.region_id)
    prov = {"original_geometry": annotation_to_dict(region.annotation), "seed": seed,
            "mode": mode, "params": asdict(params)}
    if region.provenance:
        prov["parent"] = region.provenance
    ann = region.annotation
    if isinstance(ann, PointRegion):
        return Region(region.region_id, region.category_id, ann, prov)
    geom = manifest.load_region(region, shape)
    if mode == SCRIBBLE:
        gt = geom.mask if isinstance(geom, MaskRegion) else geom.box.to_mask(shape)
        out = degrade_mask(gt, ScribbleParams(params.kernel_size_cap, params.iterations,
                                              params.sigma, params.threshold, seed))
        name = Path("masks") / (safe_name(sample.id, region.region_id) + ".png")
        save_mask(out_dir / name, out)
        new_ann = MaskRef(str((out_dir / name).resolve()))
    else:
        box = geom.box if isinstance(geom, BoxRegion) else _mask_bbox(geom.mask)
        new_ann = BoxRegion(degrade_box(box, BoxShrinkParams(params.target_area_ratio, seed)))
    return Region(region.region_id, region.category_id, new_ann, prov)


def build_benchmark(manifest: Manifest, mode: str, params, out_dir, jobs: int = 1):
    """Degrade every region of ``manifest``; returns ``(manifest, skip_report)``.

    Mask outputs are written under ``out_dir/masks``. Failing regions are
    dropped and listed in the skip report instead of aborting the batch.
    """
    if mode not in (SCRIBBLE, PARTIAL_BOX):
        raise ValidationError(f"unknown degradation mode {mode!r}")
    if mode == SCRIBBLE and not isinstance(params, ScribbleParams):
        raise ValidationError("scribble mode needs ScribbleParams")
    if mode == PARTIAL_BOX and not isinstance(params, BoxShrinkParams):
        raise ValidationError("box mode needs BoxShrinkParams")
    out_dir = Path(out_dir)

    def work(sample: Sample):
        skips = []
        regions = []
        try:
            shape = manifest.load_image(sample).shape
        except OSError as e:
            return Sample(sample.id, sample.image_path, []), [
                {"sample_id": sample.id, "region_id": None, "error": f"image: {e}"}]
        for r in sample.regions:
            try:
                regions.append(_degrade_region(manifest, sample, r, mode, params, out_dir, shape))
            except (PointPromptError, OSError) as e:
                skips.append({"sample_id": sample.id, "region_id": r.region_id,
                              "error": f"{type(e).__name__}: {e}"})
        return Sample(sample.id, str(Path(manifest.resolve(sample.image_path)).resolve()), regions), skips

    ordered = sorted(manifest.samples, key=lambda s: s.id)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(work, ordered))
    header = dict(manifest.header)
    header["degradation"] = {"mode": mode, "params": asdict(params)}
    out = manifest.with_samples([s for s, _ in results], header)
    skips = [e for _, sk in results for e in sk]
    return out, skips
