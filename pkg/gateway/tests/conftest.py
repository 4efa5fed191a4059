import json
import pathlib

import numpy as np
import pytest
SCHEMA_DIR = pathlib.Path(__file__).resolve().parents[2] / "schemas"


@pytest.fixture(scope="session")
def predictor_schema():
    return json.loads((SCHEMA_DIR / "predictor_wire.schema.json").read_text())


@pytest.fixture(scope="session")
def generator_schema():
    return json.loads((SCHEMA_DIR / "generator_wire.schema.json").read_text())


@pytest.fixture()
def two_blob_image():
    """Dark field with two bright blobs; the box center sits on blob A."""
    img = np.full((40, 40), 20, dtype=np.uint8)
    img[8:20, 8:20] = 200  # blob A, under the center of box (0, 0, 28, 28)
    img[28:36, 28:36] = 200  # blob B, outside that box
    return img
