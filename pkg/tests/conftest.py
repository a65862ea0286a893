import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))

from oracles import disk  # noqa: E402


def make_label_fixture(root: Path, n_samples=20, size=48, seed=0):
    """Synthetic VOC-style images + label maps; returns (images_dir, labels_dir)."""
    rng = np.random.default_rng(seed)
    images, labels = root / "images", root / "labels"
    images.mkdir(parents=True)
    labels.mkdir(parents=True)
    for i in range(n_samples):
        lab = np.zeros((size, size), dtype=np.uint8)
        for _ in range(2):
            cls = int(rng.integers(1, 21))
            if rng.random() < 0.5:
                cx, cy = rng.integers(10, size - 10, 2)
                lab[disk(size, size, cx, cy, int(rng.integers(5, 9)))] = cls
            else:
                x, y = rng.integers(2, size - 16, 2)
                lab[y:y + int(rng.integers(8, 14)), x:x + int(rng.integers(8, 14))] = cls
        lab[0, :3] = 255  # a few void pixels
        img = rng.integers(0, 255, (size, size, 3), dtype=np.uint8)
        Image.fromarray(img).save(images / f"{i:03d}.png")
        Image.fromarray(lab, mode="L").save(labels / f"{i:03d}.png")
    return images, labels


@pytest.fixture
def label_fixture(tmp_path):
    return make_label_fixture(tmp_path / "data")


@pytest.fixture
def voc_manifest(tmp_path, label_fixture):
    from pointprompt.dataset import builtin_categories, convert_label_maps
    images, labels = label_fixture
    pairs = [(p, labels / p.name) for p in sorted(images.glob("*.png"))]
    return convert_label_maps(pairs, builtin_categories("voc21"), tmp_path / "converted", "fixture")


# ---- acceptance reporting: one PASS/FAIL line per criterion

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): acceptance criterion, reported in the summary")


def pytest_runtest_logreport(report):
    label = _labels.get(report.nodeid)
    if label is None:
        return
    if report.when == "call" or report.outcome == "failed":
        prev = _ACCEPTANCE.get(label, "PASS")
        _ACCEPTANCE[label] = "FAIL" if report.outcome == "failed" or prev == "FAIL" else "PASS"


_labels = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            _labels[item.nodeid] = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0][2:])):
        terminalreporter.write_line(f"[{_ACCEPTANCE[label]}] {label}")
