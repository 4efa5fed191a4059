"""Thresholded pixel-wise majority voting over an ensemble of crowd labels.

Per class, the votes of all annotators are summed into a frequency map;
a pixel enters the merged label when at least ``threshold`` annotators
agree.  Pixels claimed by several classes resolve by highest vote count,
ties by lowest class_id, so the merge is deterministic and independent
of annotator order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyEnsemble,
    InsufficientAnnotators,
    PaletteMismatch,
)
from .mask_core import BinaryPlane, LabelMap

DEFAULT_THRESHOLD = 4  # minimum number of agreeing annotators


@dataclass(frozen=True)
class FrequencyMap:
    """Per-pixel vote counts for one class across the ensemble."""

    width: int
    height: int
    class_id: int
    counts: np.ndarray = field(repr=False)  # uint16, shape (height, width)
    n_annotators: int

    def __post_init__(self):
        counts = np.ascontiguousarray(np.asarray(self.counts, dtype=np.uint16))
        if counts.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"counts shape {counts.shape} != ({self.height}, {self.width})"
            )
        if counts.max(initial=0) > self.n_annotators:
            raise ValueError("count exceeds number of annotators")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class MergePolicy:
    threshold: int = DEFAULT_THRESHOLD
    overlap_rule: str = "highest_vote_then_lowest_class_id"
    min_annotators: int | None = None  # defaults to threshold

    def __post_init__(self):
        if self.threshold < 1:
            raise ValueError("threshold must be >= 1")
        if self.min_annotators is None:
            object.__setattr__(self, "min_annotators", self.threshold)
        if self.min_annotators < self.threshold:
            raise ValueError("min_annotators must be >= threshold")
        if self.overlap_rule != "highest_vote_then_lowest_class_id":
            raise ValueError(f"unknown overlap rule {self.overlap_rule!r}")


def _check_ensemble(ensemble):
    if not ensemble:
        raise EmptyEnsemble("ensemble is empty")
    first = ensemble[0]
    for m in ensemble[1:]:
        if (m.width, m.height) != (first.width, first.height):
            raise DimensionMismatch("ensemble maps differ in dimensions")
        if m.palette != first.palette:
            raise PaletteMismatch("ensemble maps differ in palette")
    return first


def build_frequency_map(ensemble, class_id) -> FrequencyMap:
    """Sum per-pixel votes for one class over all annotators."""
    first = _check_ensemble(ensemble)
    counts = np.zeros((first.height, first.width), dtype=np.uint16)
    for m in ensemble:
        counts += m.data == class_id
    return FrequencyMap(first.width, first.height, class_id, counts, len(ensemble))


def threshold_plane(freq: FrequencyMap, threshold: int) -> BinaryPlane:
    """Pixels where at least ``threshold`` annotators voted for the class."""
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    return BinaryPlane(freq.width, freq.height, freq.counts >= threshold)


def merge_labels(ensemble, policy: MergePolicy = MergePolicy()):
    """Merge an ensemble into one LabelMap plus per-class frequency maps.

    Returns ``(merged, {class_id: FrequencyMap})``.
    """
    first = _check_ensemble(ensemble)
    if len(ensemble) < policy.min_annotators:
        raise InsufficientAnnotators(
            f"ensemble size {len(ensemble)} < min_annotators {policy.min_annotators}"
        )
    class_ids = sorted(first.palette.class_ids)
    freqs = {c: build_frequency_map(ensemble, c) for c in class_ids}

    merged = np.zeros((first.height, first.width), dtype=np.uint8)
    if class_ids:
        # stack counts in ascending class_id order; argmax takes the first
        # (lowest class_id) on tied counts
        stack = np.stack([freqs[c].counts.astype(np.int32) for c in class_ids])
        claimed = stack >= policy.threshold
        contending = np.where(claimed, stack, -1)
        winner_idx = np.argmax(contending, axis=0)
        any_claim = claimed.any(axis=0)
        ids = np.asarray(class_ids, dtype=np.uint8)
        merged = np.where(any_claim, ids[winner_idx], 0).astype(np.uint8)

    return LabelMap(first.width, first.height, merged, first.palette), freqs
