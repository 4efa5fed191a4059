"""Predictor backends for the assist service.

The builtin predictor is a deterministic classical pipeline (Otsu
threshold, connected component at the box center, 3x3 closing) that
stands in for a box-prompted segmentation model; real models plug in
through :class:`RemotePredictor` over the wire contract.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import httpx
import numpy as np
from scipy import ndimage

from ..errors import BoxOutOfBounds, UpstreamMalformed, UpstreamTimeout
from ..mask_core import BinaryPlane, RleMask, decode_rle

VARIANCE_EPS = 1e-6  # below this the crop is treated as uniform
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def otsu_threshold(hist: np.ndarray) -> int:
    """Threshold t in [0, 255] maximizing between-class variance.

    Pixels <= t form the low class.  Ties resolve to the lowest t.
    """
    hist = np.asarray(hist, dtype=np.float64)
    total = hist.sum()
    w0 = np.cumsum(hist)
    levels = np.arange(hist.size)
    sum0 = np.cumsum(hist * levels)
    w1 = total - w0
    mu0 = np.divide(sum0, w0, out=np.zeros_like(sum0), where=w0 > 0)
    mu1 = np.divide(sum0[-1] - sum0, w1, out=np.zeros_like(sum0), where=w1 > 0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    return int(np.argmax(between))


def builtin_predict(image: np.ndarray, box) -> BinaryPlane:
    """Segment the object under a pixel box on a grayscale image.

    Fixed pipeline: crop, Otsu threshold (uniform crops return the whole
    box), keep the intensity side containing the box center, keep the
    8-connected component at the center (largest component if the center
    fell outside), one 3x3 binary closing, paste back.  Deterministic.
    """
    image = np.asarray(image, dtype=np.uint8)
    ih, iw = image.shape
    x0, y0, w, h = box
    if x0 < 0 or y0 < 0 or x0 + w > iw or y0 + h > ih or w < 1 or h < 1:
        raise BoxOutOfBounds(f"box {box} outside {iw}x{ih} image")

    crop = image[y0 : y0 + h, x0 : x0 + w]
    if float(np.var(crop.astype(np.float64))) < VARIANCE_EPS:
        mask = np.ones_like(crop, dtype=bool)
    else:
        hist = np.bincount(crop.ravel(), minlength=256)
        t = otsu_threshold(hist)
        high = crop > t
        cy, cx = h // 2, w // 2
        side = high if high[cy, cx] else ~high
        labels, n = ndimage.label(side, structure=EIGHT_CONNECTED)
        center_label = labels[cy, cx]
        if center_label == 0:
            sizes = ndimage.sum_labels(np.ones_like(labels), labels, range(1, n + 1))
            center_label = int(np.argmax(sizes)) + 1 if n else 0
        mask = labels == center_label
        mask = ndimage.binary_closing(mask, structure=np.ones((3, 3), dtype=bool))

    full = np.zeros((ih, iw), dtype=bool)
    full[y0 : y0 + h, x0 : x0 + w] = mask
    return BinaryPlane(iw, ih, full)


@dataclass(frozen=True)
class PredictorConfig:
    backend: str = "builtin"
    remote_url: str | None = None
    timeout_ms: int = 30000
    retries: int = 1

    def __post_init__(self):
        if self.backend not in ("builtin", "remote"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if (self.backend == "remote") != (self.remote_url is not None):
            raise ValueError("remote_url must be present iff backend is remote")
        if self.timeout_ms <= 0 or self.retries < 0:
            raise ValueError("timeout_ms must be positive and retries non-negative")


class RemotePredictor:
    """Client for the remote-predictor wire contract.

    Transport failures and 5xx responses are retried up to ``retries``
    additional attempts; structurally invalid responses are not.
    """

    MODEL_VERSION_FALLBACK = "remote-unknown"

    def __init__(self, config: PredictorConfig, client: httpx.Client | None = None):
        self.config = config
        self._client = client or httpx.Client(
            timeout=config.timeout_ms / 1000.0
        )

    def predict(self, image_b64: str, box, class_name: str):
        """Returns ``(BinaryPlane, score, model_version)``."""
        x0, y0, w, h = box
        payload = {
            "image_b64": image_b64,
            "box": {"x0": x0, "y0": y0, "w": w, "h": h},
            "class_name": class_name,
        }
        last_exc = None
        for _ in range(self.config.retries + 1):
            try:
                resp = self._client.post(self.config.remote_url, json=payload)
            except httpx.HTTPError as e:
                last_exc = e
                continue
            if resp.status_code >= 500:
                last_exc = UpstreamTimeout(f"upstream returned {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise UpstreamMalformed(
                    f"upstream returned {resp.status_code}: {resp.text[:200]}"
                )
            return self._parse(resp)
        raise UpstreamTimeout(f"upstream failed after retries: {last_exc}")

    def _parse(self, resp):
        try:
            doc = resp.json()
            rle = RleMask.from_json(doc["mask"])
            mask = decode_rle(rle)
            score = float(doc.get("score", 1.0))
            version = str(doc.get("model_version", self.MODEL_VERSION_FALLBACK))
        except Exception as e:
            raise UpstreamMalformed(f"malformed upstream response: {e}") from e
        return mask, score, version

    def healthy(self) -> bool:
        base = self.config.remote_url.rsplit("/", 1)[0]
        try:
            r = self._client.get(base + "/health", timeout=2.0)
            return r.status_code == 200
        except httpx.HTTPError:
            return False


def timed(fn, *args, **kwargs):
    """Run fn and return (result, elapsed milliseconds)."""
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, (time.perf_counter() - t0) * 1000.0
