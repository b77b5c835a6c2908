import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import ndimage

sys.path.insert(0, str(Path(__file__).parent))

from multilens.raster import Raster  # noqa: E402


def textured(rng, height, width, depth=12, sigma=1.5):
    """Random smooth texture filling most of the depth range."""
    tex = ndimage.gaussian_filter(rng.standard_normal((height, width)), sigma)
    tex = (tex - tex.min()) / (tex.max() - tex.min())
    return Raster(50 + tex * ((1 << depth) - 101), depth)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def texture64(rng):
    return textured(rng, 64, 64)
