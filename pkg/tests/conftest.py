import json
import os

import numpy as np
import pytest

ORACLE_DIR = os.path.join(os.path.dirname(__file__), "oracles")


@pytest.fixture(scope="session")
def raster_oracle():
    """Frozen Monte-Carlo overlap areas; see oracles/gen_raster_oracle.py."""
    with open(os.path.join(ORACLE_DIR, "raster_oracle.json")) as f:
        return json.load(f)


def random_blob_grid(rng, shape=(50, 50), margin=10, spots=3, amplitude=(1.5, 4.0)):
    """A grid of a few smeared blobs away from the border; compressible without
    overflow at moderate termination heights."""
    h, w = shape
    field = np.zeros(shape)
    for _ in range(spots):
        ci = rng.integers(margin, h - margin)
        cj = rng.integers(margin, w - margin)
        amp = rng.uniform(*amplitude)
        di = rng.integers(1, 3)
        dj = rng.integers(1, 3)
        field[ci - di:ci + di + 1, cj - dj:cj + dj + 1] += amp * rng.random((2 * di + 1, 2 * dj + 1))
    return field
