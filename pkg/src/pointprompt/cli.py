"""Command-line entry point: ``pointprompt {render,degrade,build,eval,vote,convert,oracle-key}``.

Exit codes: 0 success, 1 runtime/backend failure, 2 invalid input.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .dataset import (PromptTemplate, builtin_categories, build_dataset, convert_label_maps,
                      write_jsonl, write_skip_report, BUILTIN_CATEGORIES, DEFAULT_QUESTION)
from .degrade import PARTIAL_BOX, SCRIBBLE, BoxShrinkParams, ScribbleParams, build_benchmark
from .errors import PointPromptError, ValidationError
from .evaluation import EvalConfig, VoteConfig, evaluate, oracle_answer_key, vote_infer
from .gateway import HttpGateway, MockGateway, OpenAIChatGateway
from .geometry import BBox, BoxRegion, GridSpec, MaskRegion, PointRegion, disentangle
from .manifest import Category, Manifest
from .raster import Point, load_image, load_mask
from .render import PromptStyle, render_marker, save_rendered

log = logging.getLogger("pointprompt")


def _ints(text, n, flag):
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        vals = []
    if len(vals) != n:
        raise argparse.ArgumentTypeError(f"{flag} expects {n} comma-separated integers, got {text!r}")
    return vals


def _point(text):
    return Point(*_ints(text, 2, "--point"))


def _box(text):
    return BBox(*_ints(text, 4, "--box"))


def _grid(text):
    if text == "five-corner":
        return "five-corner", 1, 1
    try:
        rows, cols = (int(v) for v in text.lower().split("x"))
        return "uniform", rows, cols
    except ValueError:
        raise argparse.ArgumentTypeError(f"--vote expects 'five-corner' or ROWSxCOLS, got {text!r}") from None


def _add_style(p):
    g = p.add_argument_group("marker style")
    g.add_argument("--shape", default="dot", choices=["dot", "circle", "square", "cross"])
    g.add_argument("--color", default="red", help="colour name (red, green, blue, purple, ...)")
    g.add_argument("--radius", type=int, default=None, help="marker radius in px (default: image-relative)")
    g.add_argument("--stroke", type=int, default=2, help="ring/arm thickness in px")


def _add_grid(p):
    p.add_argument("--vote", type=_grid, default=None, metavar="GRID",
                   help="render one marker per grid position in boxes: 'five-corner' or ROWSxCOLS")
    p.add_argument("--margin", type=float, default=0.1, help="grid inset as a fraction of box size")


def _style(args) -> PromptStyle:
    try:
        return PromptStyle(args.shape, args.color, args.radius, args.stroke)
    except ValidationError as e:
        raise ValidationError(f"--color/--shape/--radius/--stroke: {e}") from e


def _grid_spec(args):
    if args.vote is None:
        return None
    layout, rows, cols = args.vote
    return GridSpec(layout, rows, cols, args.margin)


def _template(args):
    return PromptTemplate(args.question, args.answer) if hasattr(args, "answer") else PromptTemplate(args.question)


def _gateway(args):
    if args.mock:
        return MockGateway.from_file(args.mock)
    cls = OpenAIChatGateway if args.backend == "openai" else HttpGateway
    return cls.from_env(timeout=args.timeout, retries=args.retries, max_in_flight=args.max_in_flight)


def _add_backend(p):
    g = p.add_argument_group("model backend")
    g.add_argument("--mock", type=Path, default=None, help="answer-key JSON (request_id -> text); no network")
    g.add_argument("--backend", choices=["describe", "openai"], default="describe",
                   help="wire protocol for MODEL_URL when --mock is absent")
    g.add_argument("--timeout", type=float, default=30.0)
    g.add_argument("--retries", type=int, default=3)
    g.add_argument("--max-in-flight", type=int, default=8)
    g.add_argument("--matcher", choices=["token", "embedding"], default="token")


def _categories(spec) -> list[Category]:
    if spec in BUILTIN_CATEGORIES:
        return builtin_categories(spec)
    path = Path(spec)
    if path.exists():
        data = json.loads(path.read_text())
        if isinstance(data, dict):
            data = data["categories"]
        return [Category(int(c["id"]), c["name"]) if isinstance(c, dict) else Category(i, str(c))
                for i, c in enumerate(data)]
    return [Category(i, name.strip()) for i, name in enumerate(spec.split(","))]


# ---------------------------------------------------------------- commands

def cmd_render(args):
    image = load_image(args.image)
    if args.point is not None:
        region = PointRegion(args.point)
    elif args.box is not None:
        region = BoxRegion(args.box)
    else:
        region = MaskRegion(load_mask(args.mask))
    style = _style(args).resolved(image.shape)
    points = disentangle(region, _grid_spec(args), image.shape)
    out = args.out or args.image.with_name(args.image.stem + ".rendered.png")
    written = []
    for i, p in enumerate(points):
        target = out if len(points) == 1 else out.with_name(f"{out.stem}.{i}{out.suffix}")
        save_rendered(target, render_marker(image, p, style), p, style)
        written.append(str(target))
        print(f"{target}\t{p.x},{p.y}")
    return 0


def cmd_degrade(args):
    manifest = Manifest.load(args.manifest)
    if args.mode == SCRIBBLE:
        params = ScribbleParams(args.kernel_size_cap, args.iterations, args.sigma, args.threshold, args.seed)
    else:
        params = BoxShrinkParams(args.ratio, args.seed)
    out, skips = build_benchmark(manifest, args.mode, params, args.out_dir, jobs=args.jobs)
    out.save(args.out_dir / "manifest.json")
    write_skip_report(args.out_dir / "skip_report.json", skips)
    print(f"degraded {out.n_regions()} regions ({args.mode}); skipped {len(skips)}")
    for s in skips:
        print(f"  skip {s['sample_id']}/{s['region_id']}: {s['error']}")
    return 0


def cmd_build(args):
    manifest = Manifest.load(args.manifest)
    samples, skips = build_dataset(manifest, args.out_dir, _style(args), _template(args), _grid_spec(args),
                                   args.seed, args.position, args.jobs)
    write_jsonl(args.out_dir / "dataset.jsonl", samples)
    write_skip_report(args.out_dir / "skip_report.json", skips)
    print(f"wrote {len(samples)} samples to {args.out_dir / 'dataset.jsonl'}; skipped {len(skips)}")
    return 0


def _eval_config(args):
    vote = None
    grid = _grid_spec(args)
    if grid is not None:
        vote = VoteConfig(grid, args.aggregator)
    return EvalConfig(mode=args.mode, template=PromptTemplate(args.question), style=_style(args),
                      matcher=args.matcher, vote=vote, position=args.position, gal=not args.no_gal,
                      seed=args.seed, max_in_flight=args.max_in_flight)


def cmd_eval(args):
    manifest = Manifest.load(args.manifest)
    cfg = _eval_config(args)
    report = evaluate(manifest, cfg, _gateway(args), jobs=args.jobs)
    report.write_json(args.out_dir / "report.json")
    report.write_csv(args.out_dir / "report.csv")
    print(report.table())
    if report.skip_rate > args.max_skip_rate:
        log.error("skip rate %.3f exceeds --max-skip-rate %.3f", report.skip_rate, args.max_skip_rate)
        return 1
    return 0


def cmd_vote(args):
    image = load_image(args.image)
    cfg = EvalConfig(mode="box", template=PromptTemplate(args.question), style=_style(args),
                     matcher=args.matcher, vote=VoteConfig(_grid_spec(args), args.aggregator),
                     max_in_flight=args.max_in_flight)
    names = [c.name for c in _categories(args.categories)]
    session = vote_infer(image, args.box, cfg, _gateway(args), names, args.request_id)
    print(json.dumps({"request_id": session.request_id, "points": [list(p) for p in session.points],
                      "responses": session.responses, "answer": session.aggregated}, indent=2))
    return 0


def cmd_convert(args):
    labels = {p.stem: p for p in sorted(args.labels.glob("*.png"))}
    pairs = []
    for img in sorted(args.images.iterdir()):
        if img.suffix.lower() in (".png", ".jpg", ".jpeg") and img.stem in labels:
            pairs.append((img, labels[img.stem]))
    if not pairs:
        raise ValidationError(f"no image/label pairs found in {args.images} and {args.labels}")
    manifest = convert_label_maps(pairs, _categories(args.categories), args.out_dir, args.name,
                                  args.ignore_index, args.min_area)
    print(f"converted {len(pairs)} images into {manifest.n_regions()} regions -> {args.out_dir / 'manifest.json'}")
    return 0


def cmd_oracle_key(args):
    manifest = Manifest.load(args.manifest)
    cfg = _eval_config(args)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(oracle_answer_key(manifest, cfg), indent=2, sort_keys=True) + "\n")
    print(f"wrote oracle answer key to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pointprompt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--seed", type=int, default=0, help="global seed; all randomness derives from it")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker threads")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a point marker for a point, box or mask")
    p.add_argument("--image", type=Path, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--point", type=_point, metavar="X,Y")
    g.add_argument("--box", type=_box, metavar="X,Y,W,H")
    g.add_argument("--mask", type=Path)
    p.add_argument("--out", type=Path, default=None)
    _add_style(p)
    _add_grid(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("degrade", help="build a scribble-mask or partial-box benchmark")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--mode", choices=[SCRIBBLE, PARTIAL_BOX], required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--iterations", type=int, default=20)
    p.add_argument("--kernel-size-cap", type=int, default=5)
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--ratio", type=float, default=0.10, help="target area ratio for partial boxes")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("build", help="render markers and write an instruction JSONL dataset")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--question", default=DEFAULT_QUESTION)
    p.add_argument("--answer", default="{category}")
    p.add_argument("--position", choices=["center", "random"], default="center")
    _add_style(p)
    _add_grid(p)
    p.set_defaults(func=cmd_build)

    for name, func, helptext in (("eval", cmd_eval, "evaluate a model on a benchmark manifest"),
                                 ("oracle-key", cmd_oracle_key, "write a perfect answer key for a manifest")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--manifest", type=Path, required=True)
        if name == "eval":
            p.add_argument("--out-dir", type=Path, required=True)
            p.add_argument("--max-skip-rate", type=float, default=0.5)
            _add_backend(p)
        else:
            p.add_argument("--out", type=Path, required=True)
            p.add_argument("--matcher", default="token")
            p.add_argument("--max-in-flight", type=int, default=8)
        p.add_argument("--mode", choices=["seg", "box"], default="seg")
        p.add_argument("--question", default=DEFAULT_QUESTION)
        p.add_argument("--position", choices=["center", "random"], default="center")
        p.add_argument("--no-gal", action="store_true", help="outline the whole region instead of a point")
        p.add_argument("--aggregator", choices=["summarize", "majority"], default="summarize")
        _add_style(p)
        _add_grid(p)
        p.set_defaults(func=func)

    p = sub.add_parser("vote", help="vote-based recognition of one box")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--box", type=_box, required=True, metavar="X,Y,W,H")
    p.add_argument("--categories", required=True, help="voc20, voc21, a JSON file or comma-separated names")
    p.add_argument("--question", default=DEFAULT_QUESTION)
    p.add_argument("--aggregator", choices=["summarize", "majority"], default="majority")
    p.add_argument("--request-id", default="vote")
    _add_style(p)
    _add_grid(p)
    _add_backend(p)
    p.set_defaults(func=cmd_vote, vote=("five-corner", 1, 1))

    p = sub.add_parser("convert", help="turn label-map PNGs into a manifest")
    p.add_argument("--images", type=Path, required=True)
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--categories", default="voc21")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--name", default="converted")
    p.add_argument("--ignore-index", type=int, default=255)
    p.add_argument("--min-area", type=int, default=1)
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    resolved = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    log.info("config %s", json.dumps(resolved, default=str, sort_keys=True))
    try:
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (PointPromptError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
