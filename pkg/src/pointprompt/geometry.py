"""Reduce point, box and mask region annotations to representative points."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DegenerateGrid, EmptyRegion, InvalidBox, OutOfBounds
from .raster import Point, argmax_distance, as_mask, check_in_bounds, distance_transform


@dataclass(frozen=True)
class BBox:
    x: int
    y: int
    w: int
    h: int

    @property
    def area(self) -> int:
        return self.w * self.h

    def contains(self, other: "BBox") -> bool:
        return (self.x <= other.x and self.y <= other.y
                and other.x + other.w <= self.x + self.w
                and other.y + other.h <= self.y + self.h)

    def to_mask(self, shape) -> np.ndarray:
        m = np.zeros(shape[:2], dtype=bool)
        m[self.y:self.y + self.h, self.x:self.x + self.w] = True
        return m


def validate_box(b: BBox, shape=None) -> BBox:
    if b.w < 1 or b.h < 1 or b.x < 0 or b.y < 0:
        raise InvalidBox(f"invalid box {b}")
    if shape is not None and (b.x + b.w > shape[1] or b.y + b.h > shape[0]):
        raise InvalidBox(f"box {b} exceeds {shape[1]}x{shape[0]} image")
    return b


@dataclass(frozen=True)
class PointRegion:
    point: Point


@dataclass(frozen=True)
class BoxRegion:
    box: BBox


@dataclass(frozen=True, eq=False)
class MaskRegion:
    mask: np.ndarray


RegionAnnotation = Union[PointRegion, BoxRegion, MaskRegion]


@dataclass(frozen=True)
class GridSpec:
    """``layout`` is ``"five-corner"`` or ``"uniform"`` (with ``rows`` x ``cols``)."""
    layout: str = "five-corner"
    rows: int = 1
    cols: int = 1
    margin_fraction: float = 0.1

    def __post_init__(self):
        if self.layout not in ("five-corner", "uniform"):
            raise ValueError(f"unknown grid layout {self.layout!r}")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid rows and cols must be >= 1")
        if not 0 <= self.margin_fraction < 0.5:
            raise ValueError("margin_fraction must lie in [0, 0.5)")

    @property
    def size(self) -> int:
        return 5 if self.layout == "five-corner" else self.rows * self.cols


FIVE_CORNER = GridSpec()


def point_of_point(p, shape=None) -> Point:
    if shape is None:
        if p[0] < 0 or p[1] < 0:
            raise OutOfBounds(f"negative point coordinates {tuple(p)}")
        return Point(int(p[0]), int(p[1]))
    return check_in_bounds(p, shape)


def box_centroid(b: BBox) -> Point:
    validate_box(b)
    return Point(b.x + b.w // 2, b.y + b.h // 2)


def box_grid_points(b: BBox, grid: GridSpec = FIVE_CORNER) -> list[Point]:
    """Grid positions inside ``b`` after insetting each side by ``margin_fraction``.

    The inset box spans ``[x + m_w, x + w - m_w]`` horizontally (likewise
    vertically); five-corner returns its four corners in the order TL, TR, BL,
    BR, then the box centroid. Uniform grids place rows x cols cell centres
    over the inset span, row-major.
    """
    validate_box(b)
    mw = grid.margin_fraction * b.w
    mh = grid.margin_fraction * b.h
    x0, x1 = b.x + mw, b.x + b.w - mw
    y0, y1 = b.y + mh, b.y + b.h - mh

    def clamp(v, lo, hi):
        return min(max(int(np.floor(v)), lo), hi)

    def px(v):
        return clamp(v, b.x, b.x + b.w - 1)

    def py(v):
        return clamp(v, b.y, b.y + b.h - 1)

    if grid.layout == "five-corner":
        corners = [(x0, y0), (x1, y0), (x0, y1), (x1, y1)]
        points = [Point(px(x), py(y)) for x, y in corners] + [box_centroid(b)]
    else:
        xs = [x0 + (x1 - x0) * (2 * j + 1) / (2 * grid.cols) for j in range(grid.cols)]
        ys = [y0 + (y1 - y0) * (2 * i + 1) / (2 * grid.rows) for i in range(grid.rows)]
        points = [Point(px(x), py(y)) for y in ys for x in xs]
    # the inset box has collapsed at pixel resolution
    if len(set(points)) < len(points):
        raise DegenerateGrid(f"{grid.size} grid positions do not fit in {b} with margin {grid.margin_fraction}")
    return points


def mask_center(mask) -> Point:
    """Foreground pixel farthest from the mask boundary."""
    mask = as_mask(mask)
    if not mask.any():
        raise EmptyRegion("mask has no foreground pixel")
    return argmax_distance(distance_transform(mask))


def random_mask_point(mask, rng: np.random.Generator) -> Point:
    """Uniformly sampled foreground pixel (the non-centre baseline)."""
    ys, xs = np.nonzero(as_mask(mask))
    if len(xs) == 0:
        raise EmptyRegion("mask has no foreground pixel")
    i = int(rng.integers(len(xs)))
    return Point(int(xs[i]), int(ys[i]))


def disentangle(region: RegionAnnotation, grid: GridSpec | None = None, shape=None) -> list[Point]:
    if isinstance(region, PointRegion):
        return [point_of_point(region.point, shape)]
    if isinstance(region, BoxRegion):
        validate_box(region.box, shape)
        if grid is None:
            return [box_centroid(region.box)]
        return box_grid_points(region.box, grid)
    if isinstance(region, MaskRegion):
        return [mask_center(region.mask)]
    raise TypeError(f"not a region annotation: {region!r}")


def region_mask(region: RegionAnnotation, shape) -> np.ndarray:
    """Pixel footprint of a region on an image of ``shape``."""
    if isinstance(region, MaskRegion):
        return as_mask(region.mask)
    if isinstance(region, BoxRegion):
        return region.box.to_mask(shape)
    m = np.zeros(shape[:2], dtype=bool)
    x, y = check_in_bounds(region.point, shape)
    m[y, x] = True
    return m
