"""
From label maps to instruction data and scores
==============================================

End to end on a synthetic VOC-style set: label maps become a manifest with
one mask per connected component, the masks are degraded into a scribble
benchmark, each region is rendered as a red dot with a QA pair, and finally
a mock model that knows the answers is evaluated. Swap the mock for
``HttpGateway.from_env()`` to score a real model served at ``MODEL_URL``.
"""
from pathlib import Path

import numpy as np
from PIL import Image

from pointprompt import EvalConfig, MockGateway, ScribbleParams, build_benchmark, build_dataset, evaluate
from pointprompt.dataset import builtin_categories, convert_label_maps, write_jsonl
from pointprompt.evaluation import oracle_answer_key

root = Path("demo_output") / "pipeline"
rng = np.random.default_rng(0)
pairs = []
for i in range(6):
    label = np.zeros((64, 64), np.uint8)
    yy, xx = np.mgrid[:64, :64]
    label[(xx - rng.integers(16, 48)) ** 2 + (yy - rng.integers(16, 48)) ** 2 < 12 ** 2] = rng.integers(1, 21)
    image = rng.integers(0, 255, (64, 64, 3), dtype=np.uint8)
    (root / "raw").mkdir(parents=True, exist_ok=True)
    Image.fromarray(image).save(root / "raw" / f"{i}.png")
    Image.fromarray(label, mode="L").save(root / "raw" / f"{i}_label.png")
    pairs.append((root / "raw" / f"{i}.png", root / "raw" / f"{i}_label.png"))

manifest = convert_label_maps(pairs, builtin_categories("voc21"), root / "converted", "demo")
print(manifest.n_regions(), "regions from", len(manifest.samples), "images")

bench, skipped = build_benchmark(manifest, "scribble", ScribbleParams(seed=1), root / "bench")
bench.save(root / "bench" / "manifest.json")

samples, _ = build_dataset(bench, root / "dataset")
write_jsonl(root / "dataset" / "dataset.jsonl", samples)
print(samples[0].conversations)

cfg = EvalConfig()
report = evaluate(bench, cfg, MockGateway(oracle_answer_key(bench, cfg)))
print(report.table())

# a model that always says "background" does much worse
print(evaluate(bench, cfg, MockGateway(default="background")).table())
