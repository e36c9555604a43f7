import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from snnball.events import SensorGeometry
from snnball.synth import NoiseModel, make_dataset, random_sims


@pytest.fixture(scope="session")
def geometry():
    return SensorGeometry(1280, 720)


@pytest.fixture(scope="session")
def tiny_bundles(geometry):
    """Small clean dataset shared by the pipeline-level tests."""
    sims = random_sims(10, geometry, seed=7, windows=12)
    return make_dataset(
        sims, NoiseModel(edge_event_prob=1.0, background_rate=0.0),
        (0.8, 0.1, 0.1), seed=7, windows=12,
    )


@pytest.fixture(scope="session")
def tiny_samples(tiny_bundles):
    train, _val, _test = tiny_bundles
    return train.samples()


def circle_frame(cx=30, cy=25, radius=6.0):
    """One synthetic frame: the discretized circle boundary."""
    yy, xx = np.mgrid[:64, :64]
    bits = (np.abs(np.hypot(xx - cx, yy - cy) - radius) <= 0.5).astype(np.uint8)
    return bits
