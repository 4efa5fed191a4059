"""crowdseg: crowd-annotation fusion, segmentation quality metrics,
bbox-prompted assist service, synthetic image generation, and dataset
manifest assembly."""

from .fusion import FrequencyMap, MergePolicy, build_frequency_map, merge_labels, threshold_plane
from .mask_core import (
    BinaryPlane,
    BoundingBoxPct,
    ClassPalette,
    LabelMap,
    PaletteEntry,
    RleMask,
    bbox_to_pixels,
    decode_rle,
    encode_rle,
    plane,
)
from .metrics import PairScore, aggregate, pair_score, score_labelmaps, unpaired_t_test

__version__ = "0.1.0"

__all__ = [
    "BinaryPlane",
    "BoundingBoxPct",
    "ClassPalette",
    "FrequencyMap",
    "LabelMap",
    "MergePolicy",
    "PairScore",
    "PaletteEntry",
    "RleMask",
    "aggregate",
    "bbox_to_pixels",
    "build_frequency_map",
    "decode_rle",
    "encode_rle",
    "merge_labels",
    "pair_score",
    "plane",
    "score_labelmaps",
    "threshold_plane",
    "unpaired_t_test",
]
