import numpy as np
import pytest

from lesiontrack.volume import Image2D, Volume3D


def random_volume(rng, dims, levels):
    return Volume3D(rng.integers(0, levels, size=dims))


def random_image(rng, shape, levels):
    return Image2D(rng.integers(0, levels, size=shape))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
