"""Synthetic image generation from label masks.

``toy_synthesize`` is a deterministic built-in generator for desk-scale
runs: per-class mean intensity plus counter-based Gaussian noise and an
optional blur.  ``remote_generate`` talks to an external label-conditioned
generator over the wire contract, so a real image-to-image model drops in
without core changes.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
from dataclasses import dataclass, field

import httpx
import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DimensionMismatch, MissingClassIntensity, UpstreamMalformed, UpstreamTimeout
from .mask_core import ClassPalette, LabelMap

# shared with the gateway's paint mode; both sides must agree byte-for-byte
def default_intensity(class_id: int) -> int:
    return (class_id * 63) % 256


@dataclass(frozen=True)
class SynthesisParams:
    class_intensities: dict  # class_id (incl. 0) -> mean gray level
    noise_sigma: float = 0.0
    blur_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for c, v in self.class_intensities.items():
            if not (0 <= v <= 255):
                raise ValueError(f"intensity {v} for class {c} outside [0, 255]")
        if self.noise_sigma < 0 or self.blur_sigma < 0:
            raise ValueError("sigmas must be non-negative")

    @classmethod
    def defaults_for(cls, palette: ClassPalette, **kwargs):
        intensities = {0: default_intensity(0)}
        intensities.update({c: default_intensity(c) for c in palette.class_ids})
        return cls(intensities, **kwargs)


@dataclass(frozen=True)
class SyntheticImageRecord:
    image: np.ndarray = field(repr=False)  # uint8, (height, width)
    source_label: str
    generator: str  # builtin_toy | remote
    generator_version: str
    digest: str


def _params_digest(label: LabelMap, payload: dict) -> str:
    h = hashlib.sha256()
    h.update(label.data.tobytes())
    h.update(json.dumps(payload, sort_keys=True).encode())
    return h.hexdigest()


def toy_synthesize(
    label: LabelMap, params: SynthesisParams, source_ref: str = ""
) -> SyntheticImageRecord:
    """Paint class intensities, add seeded Gaussian noise, blur, clamp.

    Noise comes from a counter-based generator (Philox keyed by the seed),
    so output is bit-identical across runs and platforms for equal inputs.
    """
    missing = [c for c in [0, *label.palette.class_ids] if c not in params.class_intensities]
    if missing:
        raise MissingClassIntensity(f"no intensity for classes {missing}")

    lut = np.zeros(256, dtype=np.float64)
    for c, v in params.class_intensities.items():
        lut[c] = v
    img = lut[label.data]

    if params.noise_sigma > 0:
        rng = np.random.Generator(np.random.Philox(key=params.seed))
        img = img + rng.normal(0.0, params.noise_sigma, size=img.shape)
    if params.blur_sigma > 0:
        img = ndimage.gaussian_filter(img, sigma=params.blur_sigma)
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)

    digest = _params_digest(
        label,
        {
            "intensities": {str(k): v for k, v in params.class_intensities.items()},
            "noise_sigma": params.noise_sigma,
            "blur_sigma": params.blur_sigma,
            "seed": params.seed,
        },
    )
    return SyntheticImageRecord(img, source_ref, "builtin_toy", "toy-0.1.0", digest)


def label_to_png_b64(label: LabelMap) -> str:
    buf = io.BytesIO()
    Image.fromarray(label.data, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def remote_generate(
    label: LabelMap,
    endpoint: str,
    timeout_ms: int = 30000,
    retries: int = 1,
    request_id: str = "",
    source_ref: str = "",
    client: httpx.Client | None = None,
) -> SyntheticImageRecord:
    """Submit a label to an external generator and validate the result."""
    payload = {
        "label_png_b64": label_to_png_b64(label),
        "palette": label.palette.to_json(),
        "request_id": request_id,
    }
    own_client = client is None
    client = client or httpx.Client(timeout=timeout_ms / 1000.0)
    try:
        last_exc = None
        for _ in range(retries + 1):
            try:
                resp = client.post(endpoint, json=payload)
            except httpx.HTTPError as e:
                last_exc = e
                continue
            if resp.status_code >= 500:
                last_exc = UpstreamTimeout(f"generator returned {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise UpstreamMalformed(
                    f"generator returned {resp.status_code}: {resp.text[:200]}"
                )
            return _parse_generated(resp, label, payload, source_ref)
        raise UpstreamTimeout(f"generator failed after retries: {last_exc}")
    finally:
        if own_client:
            client.close()


def _parse_generated(resp, label, payload, source_ref):
    try:
        doc = resp.json()
        raw = base64.b64decode(doc["image_png_b64"])
        img = Image.open(io.BytesIO(raw)).convert("L")
        version = str(doc["generator_version"])
    except Exception as e:
        raise UpstreamMalformed(f"malformed generator response: {e}") from e
    if (img.width, img.height) != (label.width, label.height):
        raise DimensionMismatch(
            f"generator image {img.width}x{img.height} "
            f"vs label {label.width}x{label.height}"
        )
    digest = _params_digest(label, {"endpoint_payload_request": payload["request_id"], "generator_version": version})
    return SyntheticImageRecord(
        np.asarray(img, dtype=np.uint8), source_ref, "remote", version, digest
    )


def write_record(record: SyntheticImageRecord, image_path, sidecar_path):
    """Store the image as 8-bit grayscale PNG beside a provenance sidecar."""
    Image.fromarray(record.image, mode="L").save(image_path, format="PNG")
    sidecar = {
        "source_label": record.source_label,
        "generator": record.generator,
        "generator_version": record.generator_version,
        "digest": record.digest,
    }
    with open(sidecar_path, "w") as f:
        json.dump(sidecar, f, sort_keys=True, indent=2)
        f.write("\n")
