"""Opaque point-marker rendering (dot, circle, square, cross)."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import UnnamedColor, ValidationError
from .raster import EIGHT_CONNECTED, as_image, as_mask, check_in_bounds, save_image

SHAPES = ("dot", "circle", "square", "cross")

NAMED_COLORS = {
    "red": (255, 0, 0),
    "green": (0, 255, 0),
    "blue": (0, 0, 255),
    "purple": (128, 0, 128),
    "yellow": (255, 255, 0),
    "white": (255, 255, 255),
    "black": (0, 0, 0),
}


def color_name(rgb) -> str:
    rgb = tuple(int(c) for c in rgb)
    for name, value in NAMED_COLORS.items():
        if value == rgb:
            return name
    raise UnnamedColor(f"no registered name for color {rgb}")


def parse_color(value) -> tuple[int, int, int]:
    if isinstance(value, str):
        try:
            return NAMED_COLORS[value.lower()]
        except KeyError:
            raise UnnamedColor(f"unknown color name {value!r}; known: {', '.join(NAMED_COLORS)}") from None
    rgb = tuple(int(c) for c in value)
    if len(rgb) != 3 or not all(0 <= c <= 255 for c in rgb):
        raise ValidationError(f"color must be an RGB8 triple, got {value!r}")
    return rgb


@dataclass(frozen=True)
class PromptStyle:
    """Marker appearance. ``radius=None`` picks a size relative to the image."""
    shape: str = "dot"
    color: tuple[int, int, int] = (255, 0, 0)
    radius: int | None = None
    stroke: int = 2

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValidationError(f"unknown marker shape {self.shape!r}; expected one of {SHAPES}")
        object.__setattr__(self, "color", parse_color(self.color))
        if self.radius is not None and self.radius < 1:
            raise ValidationError("marker radius must be >= 1")
        if self.stroke < 1:
            raise ValidationError("marker stroke must be >= 1")
        if self.shape == "circle" and self.radius is not None and self.radius < self.stroke:
            raise ValidationError("circle radius must be >= stroke")

    def resolved(self, shape) -> "PromptStyle":
        if self.radius is not None:
            return self
        radius = default_radius(shape)
        return replace(self, radius=max(radius, self.stroke))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["color"] = list(self.color)
        return d

    @classmethod
    def from_dict(cls, d) -> "PromptStyle":
        return cls(shape=d["shape"], color=tuple(d["color"]), radius=d.get("radius"), stroke=d.get("stroke", 2))


def default_radius(shape) -> int:
    h, w = shape[:2]
    return max(3, math.ceil(0.01 * min(w, h)))


def footprint_offsets(style: PromptStyle) -> np.ndarray:
    """``(n, 2)`` array of (dx, dy) offsets covered by the marker."""
    r = style.radius
    if r is None:
        raise ValidationError("style radius unresolved; call style.resolved(image.shape)")
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
    d2 = dx * dx + dy * dy
    if style.shape == "dot":
        keep = d2 <= r * r
    elif style.shape == "circle":
        inner = r - style.stroke
        keep = (d2 <= r * r) & (d2 > inner * inner)
    elif style.shape == "square":
        keep = np.ones_like(d2, dtype=bool)
    else:
        t = style.stroke // 2
        keep = (np.abs(dy) <= t) | (np.abs(dx) <= t)
    return np.stack([dx[keep], dy[keep]], axis=1)


def footprint_mask(shape, p, style: PromptStyle) -> np.ndarray:
    h, w = shape[:2]
    x, y = check_in_bounds(p, shape)
    style = style.resolved(shape)
    off = footprint_offsets(style)
    xs, ys = off[:, 0] + x, off[:, 1] + y
    ok = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    m = np.zeros((h, w), dtype=bool)
    m[ys[ok], xs[ok]] = True
    return m


def render_marker(image, p, style: PromptStyle = PromptStyle()) -> np.ndarray:
    """Copy of ``image`` with one opaque marker at ``p``, clipped at the borders."""
    image = as_image(image)
    out = image.copy()
    out[footprint_mask(image.shape, p, style)] = style.color
    return out


def render_multi(image, points, style: PromptStyle = PromptStyle()) -> list[np.ndarray]:
    image = as_image(image)
    for p in points:
        check_in_bounds(p, image.shape)
    return [render_marker(image, p, style) for p in points]


def render_contour(image, mask, color=(255, 0, 0), thickness: int = 1) -> np.ndarray:
    """Paint the inner boundary of ``mask``; used by the whole-region baseline."""
    image = as_image(image)
    mask = as_mask(mask)
    inner = ndimage.binary_erosion(mask, structure=EIGHT_CONNECTED, iterations=thickness, border_value=0)
    out = image.copy()
    out[mask & ~inner] = parse_color(color)
    return out


def save_rendered(path, image, point, style: PromptStyle) -> Path:
    """Write the PNG plus a ``.json`` sidecar holding the point and style."""
    path = Path(path)
    save_image(path, image)
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps({"point": [int(point[0]), int(point[1])], "style": style.to_dict()},
                                  sort_keys=True) + "\n")
    return sidecar
