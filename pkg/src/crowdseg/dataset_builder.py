"""Assembly of control / enlarged / enhanced dataset manifests.

The control set holds real training images only; the enlarged set adds
synthetic images generated from the training labels; the enhanced set
adds quality-gated merged crowd labels on top.  Test items are always
real: synthetic and crowd items never leak into the test split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    GateViolation,
    MissingGroundTruth,
    PaletteMismatch,
    PoolTooSmall,
    RecipeViolation,
)
from .mask_core import LabelMap
from .metrics import score_labelmaps

SCHEMA_VERSION = 1
VARIANTS = ("control", "enlarged", "enhanced")
SPLIT_GENERATOR = "pcg64"  # numpy PCG64; named so runs are reproducible


@dataclass(frozen=True)
class QualityGate:
    min_dsc: float = 0.95
    min_iou: float = 0.92
    require_ground_truth: bool = True

    def __post_init__(self):
        if not (0 <= self.min_dsc <= 1 and 0 <= self.min_iou <= 1):
            raise ValueError("gate thresholds must be in [0, 1]")


@dataclass(frozen=True)
class ClassVerdict:
    class_id: int
    dsc: float
    iou: float
    passed: bool


@dataclass(frozen=True)
class GateVerdict:
    image_id: str
    per_class: tuple  # ClassVerdict, ascending class_id
    passing_classes: tuple

    @property
    def passed(self):
        return bool(self.passing_classes)


@dataclass(frozen=True)
class DatasetItem:
    image_ref: str
    label_ref: str
    source: str  # real | synthetic | crowd_merged
    split: str  # train | test
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.source not in ("real", "synthetic", "crowd_merged"):
            raise ValueError(f"unknown source {self.source!r}")
        if self.split not in ("train", "test"):
            raise ValueError(f"unknown split {self.split!r}")
        if self.split == "test" and self.source != "real":
            raise ValueError("test items must be real")


@dataclass(frozen=True)
class Recipe:
    n_real_train: int = 10
    n_synthetic: int = 10
    n_crowd: int = 5
    n_test: int = 10


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    variant: str
    items: tuple
    seed: int
    palette_json: tuple


def split_pool(image_ids, n_train, n_test, seed):
    """Deterministic train/test partition by uniform sampling.

    Sorting the pool before permuting makes the split independent of
    caller ordering.
    """
    pool = sorted(image_ids)
    if len(pool) < n_train + n_test:
        raise PoolTooSmall(
            f"pool of {len(pool)} cannot supply {n_train}+{n_test} images"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(len(pool))
    picked = [pool[i] for i in order[: n_train + n_test]]
    return picked[:n_train], picked[n_train:]


def apply_gate(merged: LabelMap, gt: LabelMap | None, gate: QualityGate, image_id=""):
    """Score a merged label against ground truth and gate per class.

    A class passes only with dsc strictly above min_dsc AND iou strictly
    above min_iou.
    """
    if gt is None:
        if gate.require_ground_truth:
            raise MissingGroundTruth(f"no ground truth for {image_id!r}")
        return GateVerdict(image_id, (), ())
    if (merged.width, merged.height) != (gt.width, gt.height):
        raise DimensionMismatch("merged and ground truth differ in dimensions")
    if merged.palette != gt.palette:
        raise PaletteMismatch("merged and ground truth differ in palette")
    verdicts = []
    for s in score_labelmaps(merged, gt):
        passed = s.dsc > gate.min_dsc and s.iou > gate.min_iou
        verdicts.append(ClassVerdict(s.class_id, s.dsc, s.iou, passed))
    passing = tuple(v.class_id for v in verdicts if v.passed)
    return GateVerdict(image_id, tuple(verdicts), passing)


def _require(count, expected, what):
    if count != expected:
        raise RecipeViolation(f"{what}: expected {expected}, got {count}")


def build_variant(
    variant,
    real_train,
    synthetic,
    crowd,
    test,
    seed,
    recipe: Recipe = Recipe(),
    palette_json=(),
    name=None,
):
    """Assemble one dataset manifest.

    ``real_train``/``test``: real DatasetItems; ``synthetic``: synthetic
    train items; ``crowd``: crowd_merged train items whose provenance must
    carry a passing gate verdict (``gate_passed`` plus scores).
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    _require(len(real_train), recipe.n_real_train, "real_train")
    _require(len(test), recipe.n_test, "test")

    items = list(real_train) + list(test)
    if variant in ("enlarged", "enhanced"):
        _require(len(synthetic), recipe.n_synthetic, "synthetic")
        items += list(synthetic)
    if variant == "enhanced":
        _require(len(crowd), recipe.n_crowd, "crowd_merged")
        for it in crowd:
            if not it.provenance.get("gate_passed"):
                raise GateViolation(
                    f"crowd item {it.image_ref!r} lacks a passing gate verdict "
                    f"(scores: {it.provenance.get('gate_scores')})"
                )
        items += list(crowd)

    for it in items:
        expected = {"real": "real", "synthetic": "synthetic", "crowd_merged": "crowd_merged"}
        if it.source not in expected:
            raise RecipeViolation(f"unknown source {it.source!r}")

    seen = set()
    for it in items:
        key = (it.image_ref, it.source)
        if key in seen:
            raise RecipeViolation(f"duplicate item {key}")
        seen.add(key)

    items = tuple(sorted(items, key=lambda it: (it.source, it.image_ref)))
    return DatasetManifest(
        name or f"{variant}-dataset", variant, items, seed, tuple(palette_json)
    )


def manifest_to_json(manifest: DatasetManifest) -> str:
    """Deterministic single-document serialization (byte-identical for
    identical inputs and seed)."""
    by_source = {}
    for it in manifest.items:
        if it.split == "train":
            by_source[it.source] = by_source.get(it.source, 0) + 1
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": manifest.name,
        "variant": manifest.variant,
        "seed": manifest.seed,
        "split_generator": SPLIT_GENERATOR,
        "palette": list(manifest.palette_json),
        "summary": {
            "train_counts": by_source,
            "n_test": sum(1 for it in manifest.items if it.split == "test"),
        },
        "items": [
            {
                "image_ref": it.image_ref,
                "label_ref": it.label_ref,
                "source": it.source,
                "split": it.split,
                "provenance": it.provenance,
            }
            for it in manifest.items
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def manifest_to_csv(manifest: DatasetManifest) -> str:
    """Flat export for training-framework ingestion."""
    lines = ["image_ref,label_ref,source,split"]
    for it in manifest.items:
        lines.append(f"{it.image_ref},{it.label_ref},{it.source},{it.split}")
    return "\n".join(lines) + "\n"


def manifest_from_json(text: str) -> DatasetManifest:
    doc = json.loads(text)
    items = tuple(
        DatasetItem(
            d["image_ref"], d["label_ref"], d["source"], d["split"], d.get("provenance", {})
        )
        for d in doc["items"]
    )
    return DatasetManifest(
        doc["name"], doc["variant"], items, doc["seed"], tuple(doc.get("palette", []))
    )
