import base64
import io

import numpy as np
from PIL import Image


def png_b64(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(arr, dtype=np.uint8), mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def png_to_array(b64: str) -> np.ndarray:
    raw = base64.b64decode(b64)
    return np.asarray(Image.open(io.BytesIO(raw)), dtype=np.uint8)


def runs_to_mask(doc: dict) -> np.ndarray:
    flat = np.zeros(doc["width"] * doc["height"], dtype=bool)
    pos, bit = 0, False
    for n in doc["runs"]:
        if bit:
            flat[pos : pos + n] = True
        pos += n
        bit = not bit
    return flat.reshape(doc["height"], doc["width"])


