"""Canonical raster types for segmentation masks.

A :class:`LabelMap` is a single-label-per-pixel integer raster; per-class
binary planes are extracted from it for overlap scoring and voting.  Masks
travel between processes either as 8-bit single-channel PNGs or as
run-length encoded documents (:class:`RleMask`).

All types are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import (
    ChecksumMismatch,
    DimensionMismatch,
    EmptyImage,
    LengthMismatch,
    PaletteMismatch,
)

BBOX_EPS = 1e-6  # slack for float noise in percent geometry from the platform


@dataclass(frozen=True)
class PaletteEntry:
    class_id: int
    name: str
    color: tuple[int, int, int] = (255, 255, 255)


class ClassPalette:
    """Ordered set of foreground classes; background 0 is implicit."""

    def __init__(self, entries):
        entries = tuple(entries)
        ids = [e.class_id for e in entries]
        names = [e.name for e in entries]
        if any(i <= 0 for i in ids):
            raise ValueError("class_ids must be strictly positive (0 is background)")
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate class_id in palette")
        if len(set(names)) != len(names) or any(not n for n in names):
            raise ValueError("class names must be unique and non-empty")
        self.entries = entries
        self._by_id = {e.class_id: e for e in entries}
        self._by_name = {e.name: e for e in entries}

    @property
    def class_ids(self):
        return [e.class_id for e in self.entries]

    def name_of(self, class_id):
        return self._by_id[class_id].name

    def id_of(self, name):
        if name not in self._by_name:
            raise KeyError(name)
        return self._by_name[name].class_id

    def __contains__(self, class_id):
        return class_id in self._by_id

    def __eq__(self, other):
        return isinstance(other, ClassPalette) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def to_json(self):
        return [
            {"class_id": e.class_id, "name": e.name, "color": list(e.color)}
            for e in self.entries
        ]

    @classmethod
    def from_json(cls, doc):
        return cls(
            PaletteEntry(d["class_id"], d["name"], tuple(d.get("color", (255, 255, 255))))
            for d in doc
        )


def _frozen_array(arr):
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class BinaryPlane:
    """Boolean membership raster; the X / Y operand of the overlap scores."""

    width: int
    height: int
    bits: np.ndarray = field(repr=False)  # bool, shape (height, width)

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"bits shape {bits.shape} != ({self.height}, {self.width})"
            )
        object.__setattr__(self, "bits", _frozen_array(bits))

    def popcount(self):
        return int(self.bits.sum())

    def __eq__(self, other):
        return (
            isinstance(other, BinaryPlane)
            and self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.bits, other.bits))
        )


@dataclass(frozen=True)
class LabelMap:
    """Multi-class raster; pixel value is the class_id, 0 is background."""

    width: int
    height: int
    data: np.ndarray = field(repr=False)  # uint8, shape (height, width)
    palette: ClassPalette

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise DimensionMismatch("LabelMap dimensions must be >= 1")
        data = np.asarray(self.data, dtype=np.uint8)
        if data.shape != (self.height, self.width):
            raise DimensionMismatch(
                f"data shape {data.shape} != ({self.height}, {self.width})"
            )
        present = np.unique(data)
        for v in present:
            if v != 0 and int(v) not in self.palette:
                raise PaletteMismatch(f"pixel value {int(v)} not in palette")
        object.__setattr__(self, "data", _frozen_array(data))

    def __eq__(self, other):
        return (
            isinstance(other, LabelMap)
            and self.width == other.width
            and self.height == other.height
            and self.palette == other.palette
            and bool(np.array_equal(self.data, other.data))
        )


@dataclass(frozen=True)
class RleMask:
    """Run-length encoded binary mask.

    ``runs`` alternate between 0-runs and 1-runs, always starting with the
    count of leading zeros (possibly 0), so no polarity flag is needed.
    ``checksum`` is the decoded popcount.
    """

    width: int
    height: int
    runs: tuple
    checksum: int

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple(int(r) for r in self.runs))

    def to_json(self):
        return {
            "width": self.width,
            "height": self.height,
            "runs": list(self.runs),
            "checksum": self.checksum,
        }

    @classmethod
    def from_json(cls, doc):
        return cls(doc["width"], doc["height"], tuple(doc["runs"]), doc["checksum"])


@dataclass(frozen=True)
class BoundingBoxPct:
    """Axis-aligned box in percent of the original image dimensions."""

    x: float
    y: float
    w: float
    h: float
    orig_width: int
    orig_height: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError("box origin must be non-negative")
        if self.w <= 0 or self.h <= 0:
            raise ValueError("box extent must be positive")
        # origin must lie inside the image; extent may spill past the far
        # edge (platform float noise) and is clamped during conversion
        if self.x > 100 + BBOX_EPS or self.y > 100 + BBOX_EPS:
            raise ValueError("box origin outside image")


def plane(label_map: LabelMap, class_id: int) -> BinaryPlane:
    """Extract the binary membership plane of one class.

    An unknown class_id yields an all-zero plane.
    """
    if class_id <= 0:
        raise ValueError("class_id must be positive")
    return BinaryPlane(
        label_map.width, label_map.height, label_map.data == class_id
    )


def encode_rle(p: BinaryPlane) -> RleMask:
    """Encode a plane into alternating run lengths (zeros first)."""
    flat = p.bits.ravel().view(np.uint8)
    changes = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat.size and flat[0] == 1:
        runs = [0] + runs
    return RleMask(p.width, p.height, tuple(runs), p.popcount())


def decode_rle(rle: RleMask) -> BinaryPlane:
    """Inverse of :func:`encode_rle` with length and checksum validation."""
    total = sum(rle.runs)
    if total != rle.width * rle.height:
        raise LengthMismatch(
            f"runs sum to {total}, expected {rle.width * rle.height}"
        )
    if any(r < 0 for r in rle.runs):
        raise LengthMismatch("negative run length")
    values = np.arange(len(rle.runs)) % 2
    flat = np.repeat(values.astype(bool), rle.runs)
    pop = int(flat.sum())
    if pop != rle.checksum:
        raise ChecksumMismatch(f"popcount {pop} != checksum {rle.checksum}")
    return BinaryPlane(rle.width, rle.height, flat.reshape(rle.height, rle.width))


def _round_half_away(v):
    return int(math.floor(v + 0.5)) if v >= 0 else -int(math.floor(-v + 0.5))


def bbox_to_pixels(b: BoundingBoxPct):
    """Convert a percent box to an integer pixel rectangle (x0, y0, w, h).

    Rounds half away from zero, then clamps into the image; width and
    height never collapse below 1 pixel.
    """
    if b.orig_width == 0 or b.orig_height == 0:
        raise EmptyImage("image has zero dimension")
    x0 = _round_half_away(b.x / 100.0 * b.orig_width)
    y0 = _round_half_away(b.y / 100.0 * b.orig_height)
    w = max(1, _round_half_away(b.w / 100.0 * b.orig_width))
    h = max(1, _round_half_away(b.h / 100.0 * b.orig_height))
    x0 = min(max(x0, 0), b.orig_width - 1)
    y0 = min(max(y0, 0), b.orig_height - 1)
    w = min(w, b.orig_width - x0)
    h = min(h, b.orig_height - y0)
    return x0, y0, w, h


def write_label_png(label_map: LabelMap, path):
    Image.fromarray(label_map.data, mode="L").save(path, format="PNG")


def read_label_png(path, palette: ClassPalette) -> LabelMap:
    img = Image.open(path).convert("L")
    data = np.asarray(img, dtype=np.uint8)
    return LabelMap(img.width, img.height, data, palette)


def write_counts_png(counts: np.ndarray, path):
    """Write a per-pixel count raster as 16-bit grayscale PNG (audit output)."""
    arr = np.asarray(counts, dtype=np.uint16)
    Image.fromarray(arr).save(path, format="PNG")


def read_counts_png(path) -> np.ndarray:
    return np.asarray(Image.open(path), dtype=np.uint16)


def write_gray_png(image: np.ndarray, path):
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="L").save(path, format="PNG")


def read_gray_png(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("L"), dtype=np.uint8)
