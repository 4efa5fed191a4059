import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import lm
from crowdseg.errors import DimensionMismatch, EmptyEnsemble, InsufficientAnnotators, PaletteMismatch
from crowdseg.fusion import MergePolicy, build_frequency_map, merge_labels, threshold_plane
from crowdseg.mask_core import ClassPalette, LabelMap, PaletteEntry


def brute_force_merge(ensemble, threshold):
    """Independent per-pixel tally; pure python, no reuse of fusion code."""
    first = ensemble[0]
    out = [[0] * first.width for _ in range(first.height)]
    class_ids = sorted(first.palette.class_ids)
    for y in range(first.height):
        for x in range(first.width):
            best_class, best_votes = 0, 0
            for c in class_ids:
                votes = sum(1 for m in ensemble if int(m.data[y, x]) == c)
                if votes >= threshold and votes > best_votes:
                    best_class, best_votes = c, votes
            out[y][x] = best_class
    return np.array(out, dtype=np.uint8)


def random_ensemble(rng, max_ann=7, max_side=32, max_classes=4):
    n_classes = int(rng.integers(1, max_classes + 1))
    palette = ClassPalette([PaletteEntry(c, f"C{c}") for c in range(1, n_classes + 1)])
    w = int(rng.integers(1, max_side + 1))
    h = int(rng.integers(1, max_side + 1))
    n = int(rng.integers(1, max_ann + 1))
    maps = [
        LabelMap(w, h, rng.integers(0, n_classes + 1, size=(h, w)).astype(np.uint8), palette)
        for _ in range(n)
    ]
    tau = int(rng.integers(1, n + 1))
    return maps, tau


class TestFrequencyMap:
    def test_identical_maps(self, palette):
        m = lm([[1, 0], [1, 2]], palette)
        f = build_frequency_map([m] * 5, 1)
        assert np.array_equal(f.counts, 5 * (m.data == 1))
        assert f.n_annotators == 5

    def test_absent_class_zero_counts(self, palette):
        m = lm([[1, 1]], palette)
        f = build_frequency_map([m, m], 2)
        assert f.counts.sum() == 0

    def test_hand_vote_count(self, palette):
        ens = [lm([[1, 0, 0]], palette), lm([[1, 1, 0]], palette), lm([[1, 1, 1]], palette)]
        f = build_frequency_map(ens, 1)
        assert f.counts.tolist() == [[3, 2, 1]]

    def test_empty_ensemble(self):
        with pytest.raises(EmptyEnsemble):
            build_frequency_map([], 1)

    def test_dimension_mismatch(self, palette):
        with pytest.raises(DimensionMismatch):
            build_frequency_map([lm([[1]], palette), lm([[1, 0]], palette)], 1)

    def test_palette_mismatch(self, palette, heart_palette):
        with pytest.raises(PaletteMismatch):
            build_frequency_map([lm([[1]], palette), lm([[1]], heart_palette)], 1)


class TestThreshold:
    @pytest.fixture
    def freq(self, palette):
        ens = [lm([[1, 0, 0]], palette), lm([[1, 1, 0]], palette), lm([[1, 1, 1]], palette)]
        return build_frequency_map(ens, 1)

    def test_tau_1_is_union(self, freq):
        assert threshold_plane(freq, 1).bits.tolist() == [[True, True, True]]

    def test_tau_n_is_intersection(self, freq):
        assert threshold_plane(freq, 3).bits.tolist() == [[True, False, False]]

    def test_tau_2(self, freq):
        assert threshold_plane(freq, 2).bits.tolist() == [[True, True, False]]

    def test_tau_above_n_empty(self, freq):
        assert threshold_plane(freq, 9).popcount() == 0

    def test_monotone_shrinkage(self, freq):
        prev = threshold_plane(freq, 1).bits
        for tau in range(2, 4):
            cur = threshold_plane(freq, tau).bits
            assert np.logical_or(~cur, prev).all()  # cur subset of prev
            prev = cur


class TestMergePolicy:
    def test_default_min_annotators_is_threshold(self):
        assert MergePolicy(threshold=4).min_annotators == 4

    def test_min_below_threshold_rejected(self):
        with pytest.raises(ValueError):
            MergePolicy(threshold=4, min_annotators=2)


class TestMerge:
    def test_unanimity(self, palette):
        m = lm([[1, 0], [2, 1]], palette)
        merged, _ = merge_labels([m] * 5, MergePolicy(threshold=4))
        assert merged == m

    def test_paper_threshold_boundary(self, palette):
        """4 of 5 annotators keep a pixel; 3 of 5 drop it."""
        kept = [lm([[1]], palette)] * 4 + [lm([[0]], palette)]
        dropped = [lm([[1]], palette)] * 3 + [lm([[0]], palette)] * 2
        merged, _ = merge_labels(kept, MergePolicy(threshold=4))
        assert merged.data[0, 0] == 1
        merged, _ = merge_labels(dropped, MergePolicy(threshold=4))
        assert merged.data[0, 0] == 0

    def test_tie_lowest_class_id(self, palette):
        # equal vote counts above threshold resolve to the lowest class_id
        ens = [lm([[1]], palette)] * 4 + [lm([[2]], palette)] * 4
        merged, _ = merge_labels(ens, MergePolicy(threshold=4))
        assert merged.data[0, 0] == 1

    def test_higher_vote_wins(self, palette):
        ens = [lm([[2]], palette)] * 5 + [lm([[1]], palette)] * 4
        merged, _ = merge_labels(ens, MergePolicy(threshold=4))
        assert merged.data[0, 0] == 2

    def test_insufficient_annotators(self, palette):
        with pytest.raises(InsufficientAnnotators):
            merge_labels([lm([[1]], palette)] * 3, MergePolicy(threshold=4))

    def test_permutation_invariance(self, palette):
        rng = np.random.default_rng(7)
        ens = [
            lm(rng.integers(0, 3, size=(6, 6)), palette) for _ in range(5)
        ]
        merged, _ = merge_labels(ens, MergePolicy(threshold=2, min_annotators=2))
        for _ in range(5):
            perm = [ens[i] for i in rng.permutation(5)]
            again, _ = merge_labels(perm, MergePolicy(threshold=2, min_annotators=2))
            assert again == merged

    def test_idempotence(self, palette):
        rng = np.random.default_rng(11)
        m = lm(rng.integers(0, 3, size=(9, 9)), palette)
        for tau in (1, 3, 5):
            merged, _ = merge_labels([m] * 5, MergePolicy(threshold=tau, min_annotators=tau))
            assert merged == m

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_oracle_equivalence(self, seed):
        rng = np.random.default_rng(seed)
        ensemble, tau = random_ensemble(rng, max_side=12)
        merged, _ = merge_labels(
            ensemble, MergePolicy(threshold=tau, min_annotators=tau)
        )
        assert np.array_equal(merged.data, brute_force_merge(ensemble, tau))
