"""Campaign ingestion: canonical manifest parsing plus the labelling
platform's export dialect.

The canonical manifest is a single JSON document (palette, images,
annotations, tasks).  Annotator submissions are grouped per image,
duplicate (annotator, image, class) submissions resolve to the latest
``created_at``, and each annotator's class strokes are flattened into one
LabelMap in painter's order.

The platform export dialect is import-only: brush results carry a base64
run-length payload (little-endian uint32 runs, ones first), rectangle
results are kept as prompt metadata, never as labels.
"""

from __future__ import annotations

import base64
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CodecError, DimensionMismatch, SchemaError, UnknownClass
from .mask_core import (
    BinaryPlane,
    BoundingBoxPct,
    ClassPalette,
    LabelMap,
    RleMask,
    decode_rle,
    read_label_png,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnnotationRecord:
    image_id: str
    annotator_id: str
    task_id: str
    class_name: str
    mask: RleMask
    created_at: str
    source_dialect: str = "canonical"

    def __post_init__(self):
        if not self.image_id or not self.annotator_id or not self.class_name:
            raise SchemaError("image_id, annotator_id and class_name must be non-empty")


@dataclass(frozen=True)
class PromptMetadata:
    """Rectangle prompts from a platform export; not labels."""

    image_id: str
    annotator_id: str
    class_name: str
    box: BoundingBoxPct
    box_pixels: tuple


@dataclass(frozen=True)
class AnnotationSet:
    image_id: str
    image_ref: str
    width: int
    height: int
    palette: ClassPalette
    labelmaps: dict  # annotator_id -> LabelMap

    def __post_init__(self):
        if not self.labelmaps:
            raise SchemaError(f"image {self.image_id}: no annotators")

    @property
    def ensemble(self):
        return [self.labelmaps[a] for a in sorted(self.labelmaps)]


@dataclass(frozen=True)
class GroundTruthEntry:
    image_id: str
    label: LabelMap


@dataclass(frozen=True)
class Stroke:
    class_id: int
    plane: BinaryPlane
    created_at: str = ""


@dataclass
class CampaignTask:
    task_id: str
    description: str = ""
    image_ids: list = field(default_factory=list)
    ai_assist: bool = False
    exemplars_provided: bool = False


@dataclass
class Campaign:
    palette: ClassPalette
    annotation_sets: list
    ground_truth: dict  # image_id -> GroundTruthEntry
    tasks: list
    superseded: list = field(default_factory=list)


def flatten_strokes(strokes, width, height, palette) -> LabelMap:
    """Flatten one annotator's class strokes into a partition raster.

    Painter's order: later ``created_at`` overwrites earlier, ties by
    ascending class_id, so the last-sorted stroke wins per pixel.
    """
    data = np.zeros((height, width), dtype=np.uint8)
    for s in sorted(strokes, key=lambda s: (s.created_at, s.class_id)):
        if (s.plane.width, s.plane.height) != (width, height):
            raise DimensionMismatch(
                f"stroke plane {s.plane.width}x{s.plane.height} vs image {width}x{height}"
            )
        data[s.plane.bits] = s.class_id
    return LabelMap(width, height, data, palette)


def load_campaign(manifest_path) -> Campaign:
    """Load a canonical campaign manifest into validated AnnotationSets."""
    manifest_path = Path(manifest_path)
    try:
        doc = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise SchemaError(f"cannot read manifest: {e}") from e
    for key in ("palette", "images", "annotations"):
        if key not in doc:
            raise SchemaError(f"manifest missing {key!r}")

    palette = ClassPalette.from_json(doc["palette"])
    base = manifest_path.parent
    images = {}
    for img in doc["images"]:
        for key in ("image_id", "path", "width", "height"):
            if key not in img:
                raise SchemaError(f"image entry missing {key!r}")
        images[img["image_id"]] = img

    # latest created_at wins per (image, annotator, class)
    chosen = {}
    superseded = []
    for rec in doc["annotations"]:
        key = (rec["image_id"], rec["annotator_id"], rec["class_name"])
        prev = chosen.get(key)
        if prev is None or rec["created_at"] > prev["created_at"]:
            if prev is not None:
                superseded.append(prev)
                log.info("superseded submission %s @ %s", key, prev["created_at"])
            chosen[key] = rec
        else:
            superseded.append(rec)
            log.info("superseded submission %s @ %s", key, rec["created_at"])

    strokes_by = {}  # (image_id, annotator_id) -> list[Stroke]
    for (image_id, annotator_id, class_name), rec in sorted(chosen.items()):
        if image_id not in images:
            raise SchemaError(f"annotation references unknown image {image_id!r}")
        img = images[image_id]
        try:
            class_id = palette.id_of(class_name)
        except KeyError:
            raise UnknownClass(
                f"annotation by {annotator_id!r} on {image_id!r}: "
                f"class {class_name!r} not in palette"
            ) from None
        if "rle" in rec:
            p = decode_rle(RleMask.from_json(rec["rle"]))
        elif "mask_path" in rec:
            lm = read_label_png(base / rec["mask_path"], palette)
            p = BinaryPlane(lm.width, lm.height, lm.data == class_id)
        else:
            raise SchemaError(f"annotation on {image_id!r} has neither rle nor mask_path")
        if (p.width, p.height) != (img["width"], img["height"]):
            raise DimensionMismatch(
                f"annotation on {image_id!r}: mask {p.width}x{p.height} "
                f"vs image {img['width']}x{img['height']}"
            )
        strokes_by.setdefault((image_id, annotator_id), []).append(
            Stroke(class_id, p, rec["created_at"])
        )

    sets = []
    for image_id in sorted(images):
        img = images[image_id]
        maps = {
            ann: flatten_strokes(st, img["width"], img["height"], palette)
            for (iid, ann), st in sorted(strokes_by.items())
            if iid == image_id
        }
        if maps:
            sets.append(
                AnnotationSet(
                    image_id, img["path"], img["width"], img["height"], palette, maps
                )
            )

    ground_truth = {}
    for image_id, img in images.items():
        gt_path = img.get("ground_truth_path")
        if gt_path:
            lm = read_label_png(base / gt_path, palette)
            if (lm.width, lm.height) != (img["width"], img["height"]):
                raise DimensionMismatch(f"ground truth dims mismatch for {image_id!r}")
            ground_truth[image_id] = GroundTruthEntry(image_id, lm)

    tasks = [
        CampaignTask(
            t["task_id"],
            t.get("description", ""),
            list(t.get("image_ids", [])),
            bool(t.get("ai_assist", False)),
            bool(t.get("exemplars_provided", False)),
        )
        for t in doc.get("tasks", [])
    ]
    return Campaign(palette, sets, ground_truth, tasks, superseded)


# --- platform export dialect -------------------------------------------------

def encode_platform_rle(p: BinaryPlane) -> str:
    """Platform brush payload: base64 of little-endian uint32 run lengths,
    alternating and starting with the count of ones."""
    flat = p.bits.ravel().view(np.uint8)
    changes = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat.size and flat[0] == 0:
        runs = [0] + runs
    return base64.b64encode(struct.pack(f"<{len(runs)}I", *runs)).decode("ascii")


def decode_platform_rle(payload: str, width: int, height: int) -> BinaryPlane:
    try:
        raw = base64.b64decode(payload, validate=True)
    except Exception as e:
        raise CodecError(f"invalid base64 brush payload: {e}") from e
    if len(raw) % 4 != 0:
        raise CodecError("brush payload not a whole number of uint32 runs")
    runs = struct.unpack(f"<{len(raw) // 4}I", raw)
    if sum(runs) != width * height:
        raise CodecError(
            f"brush runs sum to {sum(runs)}, expected {width * height}"
        )
    values = (np.arange(len(runs)) + 1) % 2  # ones first
    flat = np.repeat(values.astype(bool), runs)
    return BinaryPlane(width, height, flat.reshape(height, width))


def adapt_platform_export(export_doc):
    """Convert a platform task export into canonical records.

    Returns ``(records, prompts, n_skipped)``.  Unknown result types are
    skipped with a warning, never fatal.
    """
    records = []
    prompts = []
    skipped = 0
    for task in export_doc:
        image_id = task.get("data", {}).get("image_id") or str(task.get("id", ""))
        task_id = str(task.get("project", task.get("id", "")))
        for ann in task.get("annotations", []):
            annotator_id = str(ann.get("completed_by", ""))
            created_at = ann.get("created_at", "")
            for result in ann.get("result", []):
                rtype = result.get("type")
                value = result.get("value", {})
                w = result.get("original_width")
                h = result.get("original_height")
                if rtype == "brushlabels":
                    class_name = value["brushlabels"][0]
                    p = decode_platform_rle(value["rle_b64"], w, h)
                    from .mask_core import encode_rle

                    records.append(
                        AnnotationRecord(
                            image_id,
                            annotator_id,
                            task_id,
                            class_name,
                            encode_rle(p),
                            created_at,
                            source_dialect="platform_export",
                        )
                    )
                elif rtype == "rectanglelabels":
                    box = BoundingBoxPct(
                        value["x"], value["y"], value["width"], value["height"], w, h
                    )
                    from .mask_core import bbox_to_pixels

                    prompts.append(
                        PromptMetadata(
                            image_id,
                            annotator_id,
                            value["rectanglelabels"][0],
                            box,
                            bbox_to_pixels(box),
                        )
                    )
                else:
                    log.warning("skipping unsupported result type %r", rtype)
                    skipped += 1
    return records, prompts, skipped
