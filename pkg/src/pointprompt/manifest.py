"""Annotation manifest: the JSON document listing images, categories and regions.

Relative paths inside a manifest are resolved against the directory of the
manifest file. Example::

    {
      "dataset_name": "voc-mini",
      "categories": [{"id": 0, "name": "background"}, {"id": 1, "name": "cat"}],
      "header": {"region_rule": "..."},
      "samples": [
        {"id": "0001", "image_path": "images/0001.png",
         "regions": [
           {"region_id": "r0", "category_id": 1,
            "annotation": {"type": "mask", "path": "masks/0001_r0.png"}},
           {"region_id": "r1", "category_id": 1,
            "annotation": {"type": "box", "x": 3, "y": 4, "w": 20, "h": 10}},
           {"region_id": "r2", "category_id": 0,
            "annotation": {"type": "point", "x": 7, "y": 9}}]}]
    }
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ValidationError
from .geometry import BBox, BoxRegion, MaskRegion, PointRegion
from .raster import Point, load_image, load_mask


@dataclass(frozen=True)
class Category:
    id: int
    name: str


@dataclass(frozen=True)
class MaskRef:
    path: str


@dataclass
class Region:
    region_id: str
    category_id: int
    annotation: PointRegion | BoxRegion | MaskRef
    provenance: dict | None = None


@dataclass
class Sample:
    id: str
    image_path: str
    regions: list[Region] = field(default_factory=list)


@dataclass
class Manifest:
    dataset_name: str
    categories: list[Category]
    samples: list[Sample] = field(default_factory=list)
    header: dict = field(default_factory=dict)
    root: Path = field(default_factory=Path.cwd, compare=False, repr=False)

    def __post_init__(self):
        ids = [c.id for c in self.categories]
        if len(set(ids)) != len(ids):
            raise ValidationError("category ids must be unique")
        known = set(ids)
        for s in self.samples:
            for r in s.regions:
                if r.category_id not in known:
                    raise ValidationError(f"sample {s.id} region {r.region_id}: unknown category {r.category_id}")

    @property
    def category_names(self) -> list[str]:
        return [c.name for c in self.categories]

    def category_index(self, category_id: int) -> int:
        for i, c in enumerate(self.categories):
            if c.id == category_id:
                return i
        raise KeyError(category_id)

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.root / p

    def load_image(self, sample: Sample):
        return load_image(self.resolve(sample.image_path))

    def load_region(self, region: Region, shape=None):
        """Materialise the region as a geometry annotation (masks read from PNG)."""
        ann = region.annotation
        if isinstance(ann, MaskRef):
            mask = load_mask(self.resolve(ann.path))
            if shape is not None and mask.shape != tuple(shape[:2]):
                raise ValidationError(f"mask {ann.path} is {mask.shape}, image is {tuple(shape[:2])}")
            return MaskRegion(mask)
        return ann

    def n_regions(self) -> int:
        return sum(len(s.regions) for s in self.samples)

    # -------------------------------------------------------------- serialisation

    def to_dict(self, root: Path | None = None) -> dict:
        root = self.root if root is None else Path(root)
        out = {"dataset_name": self.dataset_name,
               "categories": [{"id": c.id, "name": c.name} for c in self.categories]}
        if self.header:
            out["header"] = self.header
        out["samples"] = [
            {"id": s.id,
             "image_path": self._rel(s.image_path, root),
             "regions": [self._region_dict(r, root) for r in s.regions]}
            for s in self.samples
        ]
        return out

    def _rel(self, path: str, root: Path) -> str:
        absolute = os.path.abspath(self.resolve(path))
        return Path(os.path.relpath(absolute, os.path.abspath(root))).as_posix()

    def _region_dict(self, r: Region, root: Path) -> dict:
        d = {"region_id": r.region_id, "category_id": r.category_id,
             "annotation": annotation_to_dict(r.annotation)}
        if isinstance(r.annotation, MaskRef):
            d["annotation"]["path"] = self._rel(r.annotation.path, root)
        if r.provenance is not None:
            prov = dict(r.provenance)
            og = prov.get("original_geometry")
            if og and og.get("type") == "mask":
                prov["original_geometry"] = {**og, "path": self._rel(og["path"], root)}
            d["provenance"] = prov
        return d

    def dumps(self, root: Path | None = None) -> str:
        return json.dumps(self.to_dict(root), indent=2) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps(path.parent))
        return path

    @classmethod
    def from_dict(cls, d: dict, root=None) -> "Manifest":
        try:
            cats = [Category(int(c["id"]), str(c["name"])) for c in d["categories"]]
            samples = [
                Sample(str(s["id"]), str(s["image_path"]),
                       [Region(str(r["region_id"]), int(r["category_id"]),
                               annotation_from_dict(r["annotation"]), r.get("provenance"))
                        for r in s.get("regions", [])])
                for s in d.get("samples", [])
            ]
            name = str(d.get("dataset_name", ""))
        except (KeyError, TypeError) as e:
            raise ValidationError(f"malformed manifest: {e!r}") from e
        return cls(name, cats, samples, dict(d.get("header", {})),
                   Path(root) if root is not None else Path.cwd())

    @classmethod
    def load(cls, path) -> "Manifest":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ValidationError(f"{path}: invalid JSON ({e})") from e
        return cls.from_dict(data, root=path.parent)

    def with_samples(self, samples, header=None) -> "Manifest":
        return replace(self, samples=list(samples), header=dict(self.header if header is None else header))


def annotation_to_dict(ann) -> dict:
    if isinstance(ann, PointRegion):
        return {"type": "point", "x": int(ann.point.x), "y": int(ann.point.y)}
    if isinstance(ann, BoxRegion):
        b = ann.box
        return {"type": "box", "x": b.x, "y": b.y, "w": b.w, "h": b.h}
    if isinstance(ann, MaskRef):
        return {"type": "mask", "path": ann.path}
    raise TypeError(f"cannot serialise annotation {ann!r}")


def annotation_from_dict(d: dict):
    kind = d.get("type")
    if kind == "point":
        return PointRegion(Point(int(d["x"]), int(d["y"])))
    if kind == "box":
        return BoxRegion(BBox(int(d["x"]), int(d["y"]), int(d["w"]), int(d["h"])))
    if kind == "mask":
        return MaskRef(str(d["path"]))
    raise ValidationError(f"unknown annotation type {kind!r}")


def safe_name(*parts: str) -> str:
    """Filesystem-safe stem built from ids."""
    keep = "-_."
    return "__".join("".join(c if c.isalnum() or c in keep else "_" for c in p) for p in parts)


def validate_files(manifest: Manifest) -> list[dict]:
    """Check every image exists and masks match image size; returns problems found."""
    problems = []
    for s in manifest.samples:
        try:
            img = manifest.load_image(s)
        except OSError as e:
            problems.append({"sample_id": s.id, "region_id": None, "error": f"image: {e}"})
            continue
        for r in s.regions:
            try:
                manifest.load_region(r, img.shape)
            except (OSError, ValidationError) as e:
                problems.append({"sample_id": s.id, "region_id": r.region_id, "error": str(e)})
    return problems
