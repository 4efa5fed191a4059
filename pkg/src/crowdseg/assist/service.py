"""HTTP service implementing the labelling platform's ML-backend contract.

Endpoints: ``GET /health``, ``POST /setup`` (label configuration),
``POST /predict`` (image + bounding-box prompt -> mask).  Requests are
independent; the only cross-request state is the class list recorded at
setup and an append-only audit log with serialized writes.
"""

from __future__ import annotations

import base64
import binascii
import io
import json
import threading
import time
from pathlib import Path

import httpx
import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image

from ..errors import (
    BoxOutOfBounds,
    ImageFetchError,
    UpstreamMalformed,
    UpstreamTimeout,
)
from ..ingest import encode_platform_rle
from ..mask_core import BoundingBoxPct, bbox_to_pixels, encode_rle
from .predictor import PredictorConfig, RemotePredictor, builtin_predict

BUILTIN_VERSION = "builtin-0.1.0"


def _load_image(body) -> np.ndarray:
    sources = [k for k in ("image_b64", "image_url", "image_path") if body.get(k)]
    if len(sources) != 1:
        raise ImageFetchError(
            f"exactly one image source required, got {sources or 'none'}"
        )
    key = sources[0]
    if key == "image_b64":
        payload = body["image_b64"]
        if payload.startswith("data:"):
            payload = payload.split(",", 1)[-1]
        try:
            raw = base64.b64decode(payload, validate=True)
        except (binascii.Error, ValueError) as e:
            raise ImageFetchError(f"invalid base64 image: {e}") from e
    elif key == "image_url":
        try:
            resp = httpx.get(body["image_url"], timeout=10.0)
            resp.raise_for_status()
            raw = resp.content
        except httpx.HTTPError as e:
            raise ImageFetchError(f"cannot fetch image: {e}") from e
    else:
        try:
            raw = Path(body["image_path"]).read_bytes()
        except OSError as e:
            raise ImageFetchError(f"cannot read image: {e}") from e
    try:
        img = Image.open(io.BytesIO(raw)).convert("L")
    except Exception as e:
        raise ImageFetchError(f"cannot decode image: {e}") from e
    return np.asarray(img, dtype=np.uint8)


class AuditLog:
    def __init__(self, path):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()

    def record(self, entry):
        if self.path is None:
            return
        line = json.dumps(entry, sort_keys=True)
        with self._lock:
            with open(self.path, "a") as f:
                f.write(line + "\n")


def create_app(
    config: PredictorConfig = PredictorConfig(),
    audit_path=None,
    remote_client=None,
) -> FastAPI:
    """Build the service; ``remote_client`` lets tests splice in an
    in-process upstream."""
    app = FastAPI(title="crowdseg-assist")
    state = {"classes": None}
    audit = AuditLog(audit_path)
    remote = (
        RemotePredictor(config, client=remote_client)
        if config.backend == "remote"
        else None
    )
    model_version = BUILTIN_VERSION if config.backend == "builtin" else "remote"

    @app.get("/health")
    def health():
        doc = {"status": "UP", "model_version": model_version}
        if remote is not None and not remote.healthy():
            doc["upstream"] = "degraded"
        return doc

    @app.post("/setup")
    async def setup(request: Request):
        body = await request.json()
        labels = body.get("label_config", {}).get("labels")
        if not isinstance(labels, list) or not labels or not all(
            isinstance(x, str) and x for x in labels
        ):
            return JSONResponse(
                {"error": "MalformedSetup", "detail": "label_config.labels required"},
                status_code=400,
            )
        state["classes"] = list(labels)
        return {"status": "ok", "model_version": model_version, "classes": labels}

    @app.post("/predict")
    async def predict(request: Request):
        body = await request.json()
        request_id = body.get("request_id", "")
        t0 = time.perf_counter()
        try:
            class_name = body.get("class_name", "")
            known = state["classes"]
            if known is None or class_name not in known:
                return JSONResponse(
                    {
                        "error": "UnknownClass",
                        "detail": f"class {class_name!r} not configured",
                        "request_id": request_id,
                    },
                    status_code=400,
                )
            image = _load_image(body)
            prompt = body["prompt"]
            box_pct = BoundingBoxPct(
                prompt["x"],
                prompt["y"],
                prompt["w"],
                prompt["h"],
                prompt.get("orig_width", image.shape[1]),
                prompt.get("orig_height", image.shape[0]),
            )
            box = bbox_to_pixels(box_pct)
            if config.backend == "builtin":
                mask = builtin_predict(image, box)
                score, version = 1.0, BUILTIN_VERSION
            else:
                payload = base64.b64encode(_encode_png(image)).decode("ascii")
                mask, score, version = remote.predict(payload, box, class_name)
                if (mask.width, mask.height) != (image.shape[1], image.shape[0]):
                    raise UpstreamMalformed(
                        f"upstream mask {mask.width}x{mask.height} "
                        f"vs image {image.shape[1]}x{image.shape[0]}"
                    )
        except (ValueError, KeyError, TypeError, BoxOutOfBounds) as e:
            return JSONResponse(
                {"error": "BadRequest", "detail": str(e), "request_id": request_id},
                status_code=400,
            )
        except ImageFetchError as e:
            return JSONResponse(
                {"error": "ImageFetchError", "detail": str(e), "request_id": request_id},
                status_code=422,
            )
        except UpstreamTimeout as e:
            return JSONResponse(
                {"error": "UpstreamTimeout", "detail": str(e), "request_id": request_id},
                status_code=504,
            )
        except UpstreamMalformed as e:
            return JSONResponse(
                {"error": "UpstreamMalformed", "detail": str(e), "request_id": request_id},
                status_code=502,
            )

        latency_ms = (time.perf_counter() - t0) * 1000.0
        rle = encode_rle(mask)
        audit.record(
            {
                "request_id": request_id,
                "class_name": class_name,
                "box": list(box),
                "mask_popcount": rle.checksum,
                "model_version": version,
                "latency_ms": latency_ms,
            }
        )
        return {
            "mask": rle.to_json(),
            "platform_rle_b64": encode_platform_rle(mask),
            "class_name": class_name,
            "model_version": version,
            "latency_ms": latency_ms,
            "score": score,
        }

    return app


def _encode_png(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image, mode="L").save(buf, format="PNG")
    return buf.getvalue()
