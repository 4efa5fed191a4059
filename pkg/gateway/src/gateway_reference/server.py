"""Reference predictor and generator servers for the mask wire contracts.

Two small FastAPI apps that speak the same JSON contracts as the main
package's remote clients.  They exist for integration testing and as
scaffolding for wrapping real model processes (proxy mode): swap the
toy behavior for a call into an actual inference server and keep the
wire handling as-is.

Predictor modes:
  echo_box   - the mask is exactly the prompt box
  threshold  - Otsu threshold in the box, keep the intensity side and
               connected component under the box center (no smoothing)
  proxy      - forward the request body to another predictor server
Generator modes:
  paint      - paint per-class mean intensities, no noise
  proxy      - forward to another generator server

Fault injection (failure_rate, latency_injection_ms) applies to every
request and is meant for exercising client retry and timeout paths.
"""

from __future__ import annotations

import argparse
import base64
import io
import random
import time
from dataclasses import dataclass

import httpx
import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image
from scipy import ndimage

PREDICTOR_MODES = ("echo_box", "threshold", "proxy")
GENERATOR_MODES = ("paint", "proxy")
VERSION = "gateway-0.1.0"


@dataclass(frozen=True)
class GatewayConfig:
    port: int = 8600
    mode: str = "echo_box"
    latency_injection_ms: int = 0
    failure_rate: float = 0.0
    proxy_url: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.failure_rate <= 1.0:
            raise ValueError(f"failure_rate {self.failure_rate} outside [0, 1]")
        if self.latency_injection_ms < 0:
            raise ValueError("latency_injection_ms must be non-negative")
        if self.mode not in PREDICTOR_MODES + GENERATOR_MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if (self.mode == "proxy") and not self.proxy_url:
            raise ValueError("proxy mode needs proxy_url")


class BadInput(Exception):
    pass


def class_intensity(class_id: int) -> int:
    """Mean gray level painted for a class; shared convention with the
    main package's toy synthesizer, both sides must agree byte-for-byte."""
    return (class_id * 63) % 256


def encode_runs(mask: np.ndarray) -> tuple[list[int], int]:
    """Row-major alternating run lengths starting with zeros, plus popcount."""
    flat = np.asarray(mask, dtype=bool).ravel()
    runs: list[int] = []
    if flat.size:
        edges = np.flatnonzero(np.diff(flat)) + 1
        bounds = np.concatenate(([0], edges, [flat.size]))
        lengths = np.diff(bounds).tolist()
        if flat[0]:
            runs.append(0)
        runs.extend(int(n) for n in lengths)
    return runs, int(flat.sum())


def _decode_image(b64: str) -> np.ndarray:
    if b64.startswith("data:"):
        b64 = b64.split(",", 1)[-1]
    try:
        raw = base64.b64decode(b64, validate=True)
        img = Image.open(io.BytesIO(raw)).convert("L")
    except Exception as e:
        raise BadInput(f"undecodable image payload: {e}") from e
    return np.asarray(img, dtype=np.uint8)


def _otsu(crop: np.ndarray) -> int:
    """Exhaustive search over the 256 candidate thresholds, lowest t wins."""
    hist = np.bincount(crop.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    best_t, best_v = 0, -1.0
    csum = np.cumsum(hist)
    cmoment = np.cumsum(hist * np.arange(256))
    for t in range(256):
        w0 = csum[t]
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            continue
        mu0 = cmoment[t] / w0
        mu1 = (cmoment[255] - cmoment[t]) / w1
        v = w0 * w1 * (mu0 - mu1) ** 2
        if v > best_v:
            best_t, best_v = t, v
    return best_t


def threshold_predict(image: np.ndarray, x0: int, y0: int, w: int, h: int) -> np.ndarray:
    """Otsu split inside the box, keep the center's side and component.

    Same recipe as the main package's builtin predictor minus the final
    morphological closing, so cross-checks compare the raw component.
    """
    crop = image[y0 : y0 + h, x0 : x0 + w]
    full = np.zeros(image.shape, dtype=bool)
    if float(np.var(crop.astype(np.float64))) < 1e-6:
        full[y0 : y0 + h, x0 : x0 + w] = True
        return full
    t = _otsu(crop)
    high = crop > t
    cy, cx = h // 2, w // 2
    side = high if high[cy, cx] else ~high
    labels, n = ndimage.label(side, structure=np.ones((3, 3), dtype=bool))
    keep = labels[cy, cx]
    if keep == 0 and n:
        sizes = ndimage.sum_labels(np.ones_like(labels), labels, range(1, n + 1))
        keep = int(np.argmax(sizes)) + 1
    full[y0 : y0 + h, x0 : x0 + w] = labels == keep
    return full


def _fault_gate(config: GatewayConfig, rng: random.Random):
    if config.latency_injection_ms:
        time.sleep(config.latency_injection_ms / 1000.0)
    if config.failure_rate and rng.random() < config.failure_rate:
        return JSONResponse({"detail": "injected failure"}, status_code=500)
    return None


def _predict_request(doc) -> tuple[str, tuple[int, int, int, int], str]:
    if not isinstance(doc, dict):
        raise BadInput("request body must be a JSON object")
    for key in ("image_b64", "box", "class_name"):
        if key not in doc:
            raise BadInput(f"missing field {key!r}")
    box = doc["box"]
    if not isinstance(box, dict):
        raise BadInput("box must be an object")
    vals = []
    for key in ("x0", "y0", "w", "h"):
        v = box.get(key)
        if not isinstance(v, int) or isinstance(v, bool):
            raise BadInput(f"box.{key} must be an integer")
        vals.append(v)
    x0, y0, w, h = vals
    if x0 < 0 or y0 < 0 or w < 1 or h < 1:
        raise BadInput(f"degenerate box {box}")
    if not isinstance(doc["class_name"], str) or not doc["class_name"]:
        raise BadInput("class_name must be a non-empty string")
    if not isinstance(doc["image_b64"], str):
        raise BadInput("image_b64 must be a string")
    return doc["image_b64"], (x0, y0, w, h), doc["class_name"]


def create_predictor_app(config: GatewayConfig, rng: random.Random | None = None) -> FastAPI:
    if config.mode not in PREDICTOR_MODES:
        raise ValueError(f"mode {config.mode!r} is not a predictor mode")
    rng = rng or random.Random()
    app = FastAPI(title="reference predictor")

    @app.get("/health")
    def health():
        return {"status": "ok", "role": "predictor", "mode": config.mode}

    @app.post("/predict")
    async def predict(request: Request):
        fault = _fault_gate(config, rng)
        if fault is not None:
            return fault
        try:
            doc = await request.json()
        except Exception:
            return JSONResponse({"detail": "body is not JSON"}, status_code=400)

        if config.mode == "proxy":
            try:
                upstream = httpx.post(config.proxy_url, json=doc, timeout=30.0)
            except httpx.HTTPError as e:
                return JSONResponse({"detail": f"proxy failure: {e}"}, status_code=502)
            return JSONResponse(upstream.json(), status_code=upstream.status_code)

        try:
            image_b64, (x0, y0, w, h), _class = _predict_request(doc)
            image = _decode_image(image_b64)
        except BadInput as e:
            return JSONResponse({"detail": str(e)}, status_code=400)
        ih, iw = image.shape
        if x0 + w > iw or y0 + h > ih:
            return JSONResponse(
                {"detail": f"box outside {iw}x{ih} image"}, status_code=400
            )

        if config.mode == "echo_box":
            mask = np.zeros((ih, iw), dtype=bool)
            mask[y0 : y0 + h, x0 : x0 + w] = True
        else:
            mask = threshold_predict(image, x0, y0, w, h)
        runs, checksum = encode_runs(mask)
        return {
            "mask": {"width": iw, "height": ih, "runs": runs, "checksum": checksum},
            "score": 1.0,
            "model_version": f"{VERSION}+{config.mode}",
        }

    return app


def _generate_request(doc) -> tuple[np.ndarray, set[int]]:
    if not isinstance(doc, dict):
        raise BadInput("request body must be a JSON object")
    for key in ("label_png_b64", "palette", "request_id"):
        if key not in doc:
            raise BadInput(f"missing field {key!r}")
    if not isinstance(doc["palette"], list):
        raise BadInput("palette must be a list")
    ids = set()
    for entry in doc["palette"]:
        if not isinstance(entry, dict) or "class_id" not in entry or "name" not in entry:
            raise BadInput(f"malformed palette entry {entry!r}")
        cid = entry["class_id"]
        if not isinstance(cid, int) or isinstance(cid, bool) or cid < 1:
            raise BadInput(f"class_id {cid!r} must be a positive integer")
        ids.add(cid)
    label = _decode_image(doc["label_png_b64"])
    present = set(np.unique(label).tolist()) - {0}
    unknown = sorted(present - ids)
    if unknown:
        raise BadInput(f"label contains classes {unknown} not in the palette")
    return label, ids


def create_generator_app(config: GatewayConfig, rng: random.Random | None = None) -> FastAPI:
    if config.mode not in GENERATOR_MODES:
        raise ValueError(f"mode {config.mode!r} is not a generator mode")
    rng = rng or random.Random()
    app = FastAPI(title="reference generator")

    @app.get("/health")
    def health():
        return {"status": "ok", "role": "generator", "mode": config.mode}

    @app.post("/generate")
    async def generate(request: Request):
        fault = _fault_gate(config, rng)
        if fault is not None:
            return fault
        try:
            doc = await request.json()
        except Exception:
            return JSONResponse({"detail": "body is not JSON"}, status_code=400)

        if config.mode == "proxy":
            try:
                upstream = httpx.post(config.proxy_url, json=doc, timeout=30.0)
            except httpx.HTTPError as e:
                return JSONResponse({"detail": f"proxy failure: {e}"}, status_code=502)
            return JSONResponse(upstream.json(), status_code=upstream.status_code)

        try:
            label, _ids = _generate_request(doc)
        except BadInput as e:
            return JSONResponse({"detail": str(e)}, status_code=400)

        lut = np.array([class_intensity(c) for c in range(256)], dtype=np.uint8)
        img = lut[label]
        buf = io.BytesIO()
        Image.fromarray(img, mode="L").save(buf, format="PNG")
        return {
            "image_png_b64": base64.b64encode(buf.getvalue()).decode("ascii"),
            "generator_version": f"{VERSION}+{config.mode}",
        }

    return app


def serve_predictor(config: GatewayConfig):
    """Run the predictor server, blocking until interrupted."""
    import uvicorn

    uvicorn.run(create_predictor_app(config), host="127.0.0.1", port=config.port)


def serve_generator(config: GatewayConfig):
    """Run the generator server, blocking until interrupted."""
    import uvicorn

    uvicorn.run(create_generator_app(config), host="127.0.0.1", port=config.port)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="crowdseg-gateway", description=__doc__)
    p.add_argument("role", choices=("predictor", "generator"))
    p.add_argument("--port", type=int, default=8600)
    p.add_argument("--mode", default=None, help="predictor: echo_box|threshold|proxy; generator: paint|proxy")
    p.add_argument("--latency-ms", type=int, default=0)
    p.add_argument("--failure-rate", type=float, default=0.0)
    p.add_argument("--proxy-url", default=None)
    args = p.parse_args(argv)
    mode = args.mode or ("echo_box" if args.role == "predictor" else "paint")
    config = GatewayConfig(
        port=args.port,
        mode=mode,
        latency_injection_ms=args.latency_ms,
        failure_rate=args.failure_rate,
        proxy_url=args.proxy_url,
    )
    if args.role == "predictor":
        serve_predictor(config)
    else:
        serve_generator(config)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
