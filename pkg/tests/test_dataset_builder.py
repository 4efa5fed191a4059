import numpy as np
import pytest

from helpers import lm
from crowdseg import dataset_builder as db
from crowdseg.errors import (
    GateViolation,
    MissingGroundTruth,
    PoolTooSmall,
    RecipeViolation,
)


def items(n, source, split, prefix):
    prov = {"gate_passed": True, "gate_scores": {}} if source == "crowd_merged" else {}
    return [
        db.DatasetItem(f"{prefix}{i:03d}.png", f"gt/{prefix}{i:03d}.png", source, split, dict(prov))
        for i in range(n)
    ]


class TestSplitPool:
    def test_disjoint_partition(self):
        pool = [f"img{i}" for i in range(20)]
        train, test = db.split_pool(pool, 10, 10, seed=42)
        assert len(train) == 10 and len(test) == 10
        assert not set(train) & set(test)
        assert set(train) | set(test) == set(pool)

    def test_deterministic(self):
        pool = [f"img{i}" for i in range(30)]
        assert db.split_pool(pool, 10, 10, 7) == db.split_pool(pool, 10, 10, 7)

    def test_caller_order_irrelevant(self):
        pool = [f"img{i}" for i in range(30)]
        assert db.split_pool(pool, 10, 10, 7) == db.split_pool(pool[::-1], 10, 10, 7)

    def test_pool_too_small(self):
        with pytest.raises(PoolTooSmall):
            db.split_pool([f"img{i}" for i in range(15)], 10, 10, 0)


class TestGate:
    def test_identity_passes(self, palette):
        m = lm([[1, 2], [0, 1]], palette)
        verdict = db.apply_gate(m, m, db.QualityGate(), image_id="x")
        assert verdict.passing_classes == (1, 2)

    def test_paper_liver_scores_pass(self):
        # dsc 0.9698 / iou 0.9415 against the (0.95, 0.92) gate
        gate = db.QualityGate()
        assert 0.9698 > gate.min_dsc and 0.9415 > gate.min_iou

    def test_exact_threshold_fails(self, palette):
        # dsc exactly 0.95 must fail the strict gate: 19/20 overlap
        a = np.zeros((1, 39), dtype=np.uint8)
        b = np.zeros((1, 39), dtype=np.uint8)
        a[0, :20] = 1
        b[0, 1:21] = 1
        pred, gt = lm(a, palette), lm(b, palette)
        verdict = db.apply_gate(pred, gt, db.QualityGate(min_dsc=0.95, min_iou=0.0), image_id="x")
        v1 = verdict.per_class[0]
        assert v1.dsc == pytest.approx(0.95)
        assert not v1.passed

    def test_missing_ground_truth(self, palette):
        m = lm([[1]], palette)
        with pytest.raises(MissingGroundTruth):
            db.apply_gate(m, None, db.QualityGate(), image_id="x")


class TestBuildVariant:
    def build(self, variant, **kw):
        args = dict(
            real_train=items(10, "real", "train", "r"),
            synthetic=items(10, "synthetic", "train", "s"),
            crowd=items(5, "crowd_merged", "train", "c"),
            test=items(10, "real", "test", "t"),
            seed=0,
        )
        args.update(kw)
        return db.build_variant(variant, **args)

    def test_enhanced_composition(self):
        m = self.build("enhanced")
        train = [it for it in m.items if it.split == "train"]
        by = {}
        for it in train:
            by[it.source] = by.get(it.source, 0) + 1
        assert by == {"real": 10, "synthetic": 10, "crowd_merged": 5}
        assert sum(1 for it in m.items if it.split == "test") == 10

    def test_recipe_violation_message(self):
        with pytest.raises(RecipeViolation, match="synthetic: expected 10, got 0"):
            self.build("enlarged", synthetic=[])

    def test_gate_violation(self):
        bad = items(5, "crowd_merged", "train", "c")
        bad[2].provenance["gate_passed"] = False
        with pytest.raises(GateViolation, match="c002"):
            self.build("enhanced", crowd=bad)

    def test_subset_chain(self):
        keys = lambda m: {(it.image_ref, it.source) for it in m.items}
        control = self.build("control")
        enlarged = self.build("enlarged")
        enhanced = self.build("enhanced")
        assert keys(control) <= keys(enlarged) <= keys(enhanced)

    def test_test_purity_enforced_by_type(self):
        with pytest.raises(ValueError):
            db.DatasetItem("x.png", "y.png", "synthetic", "test")

    def test_duplicate_rejected(self):
        dup = items(10, "real", "train", "r")
        dup[1] = db.DatasetItem(dup[0].image_ref, "other", "real", "train")
        with pytest.raises(RecipeViolation, match="duplicate"):
            self.build("control", real_train=dup)

    def test_json_determinism(self):
        a = db.manifest_to_json(self.build("enhanced"))
        b = db.manifest_to_json(self.build("enhanced"))
        assert a == b

    def test_json_roundtrip(self):
        m = self.build("enhanced")
        again = db.manifest_from_json(db.manifest_to_json(m))
        assert again.items == m.items and again.variant == m.variant

    def test_csv_export(self):
        text = db.manifest_to_csv(self.build("control"))
        lines = text.strip().splitlines()
        assert lines[0] == "image_ref,label_ref,source,split"
        assert len(lines) == 21
