"""Region-recognition evaluation: segmentation-proxy mIoU and box accuracy."""
from __future__ import annotations

import csv
import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import PromptTemplate, select_points
from .degrade import derive_seed
from .errors import BackendError, PointPromptError, ValidationError
from .gateway import ChatRequest, chat_many, match_category
from .geometry import BoxRegion, GridSpec, MaskRegion, PointRegion, box_centroid, box_grid_points, region_mask
from .manifest import Manifest
from .render import PromptStyle, color_name, render_contour, render_marker, render_multi

SUMMARY_PROMPT = ("Here is a list of responses: [{responses}]. The instruction from the user is "
                  "{instruction} Please summarize these responses and answer the instruction from the user.")

SEG_PROXY = "seg"
BOX_ACCURACY = "box"


@dataclass(frozen=True)
class VoteConfig:
    grid: GridSpec = GridSpec()
    aggregator: str = "summarize"

    def __post_init__(self):
        if self.aggregator not in ("summarize", "majority"):
            raise ValidationError(f"unknown vote aggregator {self.aggregator!r}")


@dataclass(frozen=True)
class EvalConfig:
    mode: str = SEG_PROXY
    template: PromptTemplate = PromptTemplate()
    style: PromptStyle = PromptStyle()
    matcher: str = "token"
    vote: VoteConfig | None = None
    position: str = "center"
    gal: bool = True
    seed: int = 0
    max_in_flight: int = 8

    def __post_init__(self):
        if self.mode not in (SEG_PROXY, BOX_ACCURACY):
            raise ValidationError(f"unknown eval mode {self.mode!r}")
        if self.position not in ("center", "random"):
            raise ValidationError(f"unknown position strategy {self.position!r}")
        if self.matcher not in ("token", "embedding"):
            raise ValidationError(f"unknown matcher {self.matcher!r}")

    def describe(self) -> dict:
        d = {"mode": self.mode, "question": self.template.question, "answer": self.template.answer,
             "style": self.style.to_dict(), "matcher": self.matcher, "position": self.position,
             "gal": self.gal, "seed": self.seed}
        d["vote"] = None if self.vote is None else {"grid": asdict(self.vote.grid),
                                                    "aggregator": self.vote.aggregator}
        return d


@dataclass
class VoteSession:
    request_id: str
    points: list
    responses: list
    aggregated: str
    predicted: int | None = None


@dataclass
class EvalReport:
    per_class: list[dict]
    miou: float
    accuracy: float
    n_samples: int
    n_skipped: int
    per_sample: list[dict] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)
    header: dict = field(default_factory=dict)
    miou_defined: bool = True

    @property
    def skip_rate(self) -> float:
        total = self.n_samples + self.n_skipped
        return self.n_skipped / total if total else 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def write_json(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["category", "intersection_px", "union_px", "iou", "accuracy"])
            for row in self.per_class:
                w.writerow([row["category"], row["intersection_px"], row["union_px"],
                            "" if row["iou"] is None else f"{row['iou']:.6f}", ""])
            w.writerow(["__summary__", sum(r["intersection_px"] for r in self.per_class),
                        sum(r["union_px"] for r in self.per_class), f"{self.miou:.6f}",
                        f"{self.accuracy:.6f}"])
        return path

    def table(self) -> str:
        lines = [f"{'category':<20} {'IoU':>8}"]
        for row in self.per_class:
            if row["iou"] is not None:
                lines.append(f"{row['category']:<20} {row['iou']:>8.4f}")
        flag = "" if self.miou_defined else " (undefined: no scored pixels)"
        lines.append(f"{'mIoU':<20} {self.miou:>8.4f}{flag}")
        lines.append(f"{'accuracy':<20} {self.accuracy:>8.4f}")
        lines.append(f"samples={self.n_samples} skipped={self.n_skipped}")
        return "\n".join(lines)


def compute_miou(intersection, union) -> float:
    """Unweighted mean IoU over classes whose union is non-zero (0.0 if none)."""
    inter = np.asarray(intersection, dtype=np.float64)
    uni = np.asarray(union, dtype=np.float64)
    if (inter < 0).any() or (uni < 0).any():
        raise ValueError("accumulators must be non-negative")
    present = uni > 0
    if not present.any():
        return 0.0
    return float(np.mean(inter[present] / uni[present]))


def confusion_to_iou(confusion):
    """Per-class (intersection, union) from a ``gold x predicted`` pixel confusion matrix."""
    confusion = np.asarray(confusion)
    inter = np.diag(confusion)
    union = confusion.sum(axis=0) + confusion.sum(axis=1) - inter
    return inter, union


# ---------------------------------------------------------------- voting

def majority_vote(indices) -> int:
    counts = Counter(indices)
    if not counts:
        raise ValidationError("no votes")
    best = max(counts.values())
    return min(i for i, c in counts.items() if c == best)


def summary_prompt(responses, instruction: str) -> str:
    return SUMMARY_PROMPT.format(responses=", ".join(responses), instruction=instruction)


def vote_infer(image, box, cfg: EvalConfig, gateway, categories, request_id: str) -> VoteSession:
    """Query the model once per grid position inside ``box`` and aggregate.

    Failed per-point queries are dropped; the session fails only when every
    point fails.
    """
    if cfg.vote is None:
        raise ValidationError("vote_infer needs cfg.vote")
    style = cfg.style.resolved(image.shape)
    question = cfg.template.render_question(cfg.style)
    points = box_grid_points(box, cfg.vote.grid)
    images = render_multi(image, points, style)
    reqs = [ChatRequest.from_array(im, question, f"{request_id}/v{i}") for i, im in enumerate(images)]
    results = chat_many(gateway, reqs, cfg.max_in_flight)
    responses = [r.text if not isinstance(r, Exception) else None for r in results]
    answered = [t for t in responses if t is not None]
    if not answered:
        raise BackendError(f"all {len(points)} vote queries failed for {request_id}")
    if cfg.vote.aggregator == "majority":
        votes = [match_category(t, categories, cfg.matcher, gateway) for t in answered]
        pred = majority_vote(votes)
        return VoteSession(request_id, points, responses, categories[pred], pred)
    centre = render_marker(image, box_centroid(box), style)
    req = ChatRequest.from_array(centre, summary_prompt(answered, question), f"{request_id}/summary")
    text = gateway.chat(req).text
    return VoteSession(request_id, points, responses, text)


# ---------------------------------------------------------------- evaluation

def _query_region(image, geom, cfg: EvalConfig, gateway, categories, request_id, seed):
    style = cfg.style.resolved(image.shape)
    if cfg.vote is not None and isinstance(geom, BoxRegion):
        session = vote_infer(image, geom.box, cfg, gateway, categories, request_id)
        if session.predicted is not None:
            return session.aggregated, session.predicted
        return session.aggregated, match_category(session.aggregated, categories, cfg.matcher, gateway)
    if cfg.gal or isinstance(geom, PointRegion):
        question = cfg.template.render_question(cfg.style)
        position = cfg.position if isinstance(geom, MaskRegion) else "center"
        p = select_points(geom, image.shape, None, position, seed)[0]
        rendered = render_marker(image, p, style)
    else:
        question = cfg.template.question.format(color=color_name(cfg.style.color), form="contour")
        rendered = render_contour(image, region_mask(geom, image.shape), style.color, max(1, style.stroke // 2))
    text = gateway.chat(ChatRequest.from_array(rendered, question, request_id)).text
    return text, match_category(text, categories, cfg.matcher, gateway)


def _eval_sample(manifest: Manifest, sample, cfg: EvalConfig, gateway, categories):
    n = len(categories)
    confusion = np.zeros((n, n), dtype=np.int64)
    records, skips = [], []
    try:
        image = manifest.load_image(sample)
    except OSError as e:
        return confusion, records, [{"sample_id": sample.id, "region_id": None, "error": f"image: {e}"}]
    h, w = image.shape[:2]
    gold_map = np.full((h, w), -1, dtype=np.int64)
    pred_map = np.full((h, w), -1, dtype=np.int64)
    for region in sample.regions:
        rid = f"{sample.id}/{region.region_id}"
        try:
            geom = manifest.load_region(region, image.shape)
            footprint = region_mask(geom, image.shape)
            seed = derive_seed(cfg.seed, sample.id, region.region_id)
            text, pred = _query_region(image, geom, cfg, gateway, categories, rid, seed)
        except (PointPromptError, OSError) as e:
            skips.append({"sample_id": sample.id, "region_id": region.region_id,
                          "error": f"{type(e).__name__}: {e}"})
            continue
        gold = manifest.category_index(region.category_id)
        # overlapping regions: last writer wins, in region order
        gold_map[footprint] = gold
        pred_map[footprint] = pred
        records.append({"id": rid, "response": text, "predicted": categories[pred],
                        "gold": categories[gold], "correct": pred == gold})
    scored = gold_map >= 0
    np.add.at(confusion, (gold_map[scored], pred_map[scored]), 1)
    return confusion, records, skips


def evaluate(manifest: Manifest, cfg: EvalConfig, gateway, jobs: int = 1) -> EvalReport:
    """Query the model for every region and score the answers.

    The predicted class is painted over each region's pixels and compared with
    the region's own category, giving per-class IoU; accuracy counts exact
    category matches per region. Both are reported in either mode.
    """
    categories = manifest.category_names
    ordered = sorted(manifest.samples, key=lambda s: s.id)

    def work(s):
        return _eval_sample(manifest, s, cfg, gateway, categories)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(work, ordered))

    n = len(categories)
    confusion = np.zeros((n, n), dtype=np.int64)
    per_sample, skipped = [], []
    for conf, recs, sk in results:
        confusion += conf
        per_sample.extend(recs)
        skipped.extend(sk)
    inter, union = confusion_to_iou(confusion)
    per_class = [{"category": c, "intersection_px": int(i), "union_px": int(u),
                  "iou": float(i / u) if u else None}
                 for c, i, u in zip(categories, inter, union)]
    n_samples = len(per_sample)
    correct = sum(r["correct"] for r in per_sample)
    header = {"dataset_name": manifest.dataset_name, "config": cfg.describe(),
              "overlap_rule": "overlapping regions in one image: last region in manifest order wins",
              "score_support": "only pixels covered by some region are scored"}
    return EvalReport(per_class=per_class, miou=compute_miou(inter, union),
                      accuracy=correct / n_samples if n_samples else 0.0,
                      n_samples=n_samples, n_skipped=len(skipped), per_sample=per_sample,
                      skipped=skipped, header=header, miou_defined=bool((union > 0).any()))


def oracle_answer_key(manifest: Manifest, cfg: EvalConfig) -> dict[str, str]:
    """Answer key under which a mock model answers every query correctly."""
    names = {c.id: c.name for c in manifest.categories}
    key = {}
    for s in manifest.samples:
        for r in s.regions:
            rid = f"{s.id}/{r.region_id}"
            name = names[r.category_id]
            key[rid] = name
            if cfg.vote is not None and isinstance(r.annotation, BoxRegion):
                for i in range(cfg.vote.grid.size):
                    key[f"{rid}/v{i}"] = name
                key[f"{rid}/summary"] = name
    return key
