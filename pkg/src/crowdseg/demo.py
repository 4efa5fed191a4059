"""Bundled demo campaign generator.

Builds a small, fully synthetic labelling campaign offline: grayscale
images with two elliptical structures, ground-truth labels, and several
perturbed annotator masks per image (shift / dilate / erode noise with a
fixed seed).  Every CLI subcommand and the crowd-simulation fixtures run
on top of this.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy import ndimage

from .ingest import Stroke, flatten_strokes
from .mask_core import (
    BinaryPlane,
    ClassPalette,
    LabelMap,
    PaletteEntry,
    encode_rle,
    write_gray_png,
    write_label_png,
)
from .synth import SynthesisParams, toy_synthesize

DEMO_PALETTE = ClassPalette(
    [
        PaletteEntry(1, "Liver", (200, 80, 80)),
        PaletteEntry(2, "Aorta", (80, 80, 200)),
    ]
)


def _ellipse(h, w, cy, cx, ry, rx):
    yy, xx = np.mgrid[0:h, 0:w]
    return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0


def make_ground_truth(rng, size=64) -> LabelMap:
    h = w = size
    data = np.zeros((h, w), dtype=np.uint8)
    cy = rng.integers(h // 3, 2 * h // 3)
    cx = rng.integers(w // 3, 2 * w // 3)
    ry = rng.integers(10, 16)
    rx = rng.integers(12, 18)
    data[_ellipse(h, w, cy, cx, ry, rx)] = 1
    # smaller structure away from the first
    cy2 = (cy + h // 2) % h
    cx2 = (cx + w // 2) % w
    r2 = rng.integers(4, 7)
    cy2 = int(np.clip(cy2, r2 + 1, h - r2 - 2))
    cx2 = int(np.clip(cx2, r2 + 1, w - r2 - 2))
    data[_ellipse(h, w, cy2, cx2, r2, r2)] = 2
    return LabelMap(w, h, data, DEMO_PALETTE)


def perturb_annotator(gt: LabelMap, rng, skill="crowd") -> LabelMap:
    """One simulated annotator: per-class shift plus dilate/erode.

    ``crowd`` skill shifts by up to 1 px and overdraws often; ``expert``
    rarely shifts and rarely overdraws, so merged labels stay close to
    ground truth.
    """
    shift_p, dilate_p, erode_p = (
        (1.0, 0.5, 0.12) if skill == "crowd" else (0.25, 0.12, 0.04)
    )
    strokes = []
    for c in gt.palette.class_ids:
        bits = gt.data == c
        if rng.random() < shift_p:
            dy, dx = rng.integers(-1, 2, size=2)
            bits = np.roll(bits, (dy, dx), axis=(0, 1))
        op = rng.random()
        # annotators tend to overdraw; the vote threshold trims the excess
        if op < dilate_p:
            bits = ndimage.binary_dilation(bits)
        elif op < dilate_p + erode_p:
            bits = ndimage.binary_erosion(bits)
        strokes.append(Stroke(c, BinaryPlane(gt.width, gt.height, bits), "t0"))
    return flatten_strokes(strokes, gt.width, gt.height, gt.palette)


def generate_campaign(out_dir, n_images=8, n_annotators=5, seed=1234, size=64, skill="crowd"):
    """Write images, ground truth, annotator masks, and the campaign
    manifest; returns the manifest path."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "gt").mkdir(exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(seed))

    images_doc = []
    annotations_doc = []
    image_ids = []
    for i in range(n_images):
        image_id = f"img{i:03d}"
        image_ids.append(image_id)
        gt = make_ground_truth(rng, size=size)
        params = SynthesisParams.defaults_for(
            DEMO_PALETTE, noise_sigma=6.0, blur_sigma=0.8, seed=seed + i
        )
        rec = toy_synthesize(gt, params, source_ref=image_id)
        write_gray_png(rec.image, out / "images" / f"{image_id}.png")
        write_label_png(gt, out / "gt" / f"{image_id}.png")
        images_doc.append(
            {
                "image_id": image_id,
                "path": f"images/{image_id}.png",
                "width": size,
                "height": size,
                "ground_truth_path": f"gt/{image_id}.png",
            }
        )
        for a in range(n_annotators):
            ann = perturb_annotator(gt, rng, skill=skill)
            for c in DEMO_PALETTE.class_ids:
                rle = encode_rle(
                    BinaryPlane(ann.width, ann.height, ann.data == c)
                )
                annotations_doc.append(
                    {
                        "image_id": image_id,
                        "annotator_id": f"annotator{a:02d}",
                        "task_id": "task5",
                        "class_name": DEMO_PALETTE.name_of(c),
                        "created_at": f"2024-01-01T00:{i:02d}:{a:02d}Z",
                        "rle": rle.to_json(),
                    }
                )

    manifest = {
        "palette": DEMO_PALETTE.to_json(),
        "images": images_doc,
        "annotations": annotations_doc,
        "tasks": [
            {
                "task_id": "task5",
                "description": "abdominal structures with assistance and exemplars",
                "image_ids": image_ids,
                "ai_assist": True,
                "exemplars_provided": True,
            }
        ],
    }
    manifest_path = out / "campaign.json"
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest_path
