"""Instruction-tuning data: render one marker per region and emit QA conversations."""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .degrade import derive_seed
from .errors import PointPromptError, ValidationError
from .geometry import GridSpec, MaskRegion, disentangle, random_mask_point
from .manifest import Category, Manifest, MaskRef, Region, Sample, safe_name
from .raster import label_components, load_image, load_label_map, save_mask
from .render import PromptStyle, color_name, render_marker, save_rendered

DEFAULT_QUESTION = "What is the category of the object under the {color} {form}?"

VOC20 = ("aeroplane", "bicycle", "bird", "boat", "bottle", "bus", "car", "cat", "chair", "cow",
         "diningtable", "dog", "horse", "motorbike", "person", "pottedplant", "sheep", "sofa",
         "train", "tvmonitor")
VOC21 = ("background",) + VOC20

BUILTIN_CATEGORIES = {"voc20": VOC20, "voc21": VOC21}


def builtin_categories(name: str) -> list[Category]:
    """VOC21 uses ids 0..20 (0 = background); VOC20 uses 1..20."""
    names = BUILTIN_CATEGORIES[name]
    first = 1 if name == "voc20" else 0
    return [Category(first + i, n) for i, n in enumerate(names)]


@dataclass(frozen=True)
class PromptTemplate:
    question: str = DEFAULT_QUESTION
    answer: str = "{category}"

    def render_question(self, style: PromptStyle) -> str:
        return self.question.format(color=color_name(style.color), form=style.shape)

    def render_answer(self, category: str) -> str:
        return self.answer.format(category=category)


def region_descriptor(style: PromptStyle) -> str:
    """E.g. ``"red dot"`` or ``"purple circle"``."""
    return f"{color_name(style.color)} {style.shape}"


@dataclass
class InstructionSample:
    id: str
    rendered_image_path: str
    prompt_style: dict
    conversations: list[dict]
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "InstructionSample":
        return cls(**json.loads(line))


def style_descriptor(style: PromptStyle) -> dict:
    return {**style.to_dict(), "color_name": color_name(style.color), "descriptor": region_descriptor(style)}


def select_points(region, shape, grid=None, position="center", seed=0):
    """Marker positions for one region: the GAL points, or a random mask pixel."""
    if position == "random":
        if not isinstance(region, MaskRegion):
            raise ValidationError("random positions are only defined for mask regions")
        return [random_mask_point(region.mask, np.random.default_rng(seed))]
    if position != "center":
        raise ValidationError(f"unknown position strategy {position!r}")
    if grid is not None and not hasattr(region, "box"):
        grid = None
    return disentangle(region, grid, shape)


def _build_sample(manifest, sample, style, template, grid, seed, out_dir, position):
    records, skips = [], []
    try:
        image = manifest.load_image(sample)
    except OSError as e:
        return records, [{"sample_id": sample.id, "region_id": None, "error": f"image: {e}"}]
    names = {c.id: c.name for c in manifest.categories}
    resolved = style.resolved(image.shape)
    question = template.render_question(style)
    for region in sample.regions:
        try:
            geom = manifest.load_region(region, image.shape)
            rseed = derive_seed(seed, sample.id, region.region_id)
            points = select_points(geom, image.shape, grid, position, rseed)
        except (PointPromptError, OSError) as e:
            skips.append({"sample_id": sample.id, "region_id": region.region_id,
                          "error": f"{type(e).__name__}: {e}"})
            continue
        for k, p in enumerate(points):
            stem = safe_name(sample.id, region.region_id)
            if len(points) > 1:
                stem += f"__p{k}"
            rel = Path("images") / f"{stem}.png"
            save_rendered(out_dir / rel, render_marker(image, p, resolved), p, resolved)
            rid = f"{sample.id}/{region.region_id}" + (f"/p{k}" if len(points) > 1 else "")
            records.append(InstructionSample(
                id=rid,
                rendered_image_path=rel.as_posix(),
                prompt_style=style_descriptor(resolved),
                conversations=[{"role": "user", "text": question},
                               {"role": "assistant", "text": template.render_answer(names[region.category_id])}],
                meta={"sample_id": sample.id, "region_id": region.region_id,
                      "category_id": region.category_id, "point": [int(p.x), int(p.y)],
                      "source_image": os.path.abspath(manifest.resolve(sample.image_path))},
            ))
    return records, skips


def build_dataset(manifest: Manifest, out_dir, style: PromptStyle = PromptStyle(),
                  template: PromptTemplate = PromptTemplate(), grid: GridSpec | None = None,
                  seed: int = 0, position: str = "center", jobs: int = 1):
    """Render markers for every region; returns ``(samples, skip_report)``.

    Rendered PNGs (with JSON sidecars) go under ``out_dir/images``; samples are
    ordered by source sample id, then region order, then grid position.
    """
    region_descriptor(style)  # fail fast on unnamed colours
    out_dir = Path(out_dir)
    ordered = sorted(manifest.samples, key=lambda s: s.id)

    def work(s):
        return _build_sample(manifest, s, style, template, grid, seed, out_dir, position)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(work, ordered))
    return [r for recs, _ in results for r in recs], [e for _, sk in results for e in sk]


def write_jsonl(path, samples) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for s in samples:
            f.write(s.to_json() + "\n")
    return path


def read_jsonl(path) -> list[InstructionSample]:
    with open(path, encoding="utf-8") as f:
        return [InstructionSample.from_json(line) for line in f if line.strip()]


def write_skip_report(path, skips) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"n_skipped": len(skips), "skipped": skips}, indent=2) + "\n")
    return path


# ---------------------------------------------------------------- label-map conversion

def convert_label_maps(pairs, categories, out_dir, dataset_name="converted", ignore_index=255,
                       min_area=1) -> Manifest:
    """Build a manifest from ``(image_path, label_map_path)`` pairs.

    Each pixel value of a label map is a category id; every 8-connected
    component of one id becomes its own mask region. Values equal to
    ``ignore_index`` or missing from ``categories`` are dropped. The manifest
    is written to ``out_dir/manifest.json`` with masks under ``out_dir/masks``.
    """
    out_dir = Path(out_dir)
    known = {c.id for c in categories}
    samples = []
    for image_path, label_path in sorted(pairs, key=lambda p: Path(p[0]).stem):
        image_path = Path(image_path)
        labels = load_label_map(label_path)
        shape = load_image(image_path).shape
        if labels.shape != shape[:2]:
            raise ValidationError(f"{label_path} is {labels.shape}, image {image_path} is {shape[:2]}")
        sid = image_path.stem
        regions = []
        for value in np.unique(labels):
            value = int(value)
            if value == ignore_index or value not in known:
                continue
            comp, n = label_components(labels == value)
            for k in range(1, n + 1):
                m = comp == k
                if m.sum() < min_area:
                    continue
                rid = f"c{value}_{len(regions)}"
                rel = Path("masks") / f"{safe_name(sid, rid)}.png"
                save_mask(out_dir / rel, m)
                regions.append(Region(rid, value, MaskRef(rel.as_posix())))
        samples.append(Sample(sid, os.path.abspath(image_path), regions))
    header = {"region_rule": "one region per 8-connected component of each label value",
              "ignore_index": ignore_index, "min_area": min_area}
    manifest = Manifest(dataset_name, list(categories), samples, header, root=out_dir)
    manifest.save(out_dir / "manifest.json")
    return Manifest.load(out_dir / "manifest.json")
