import numpy as np
import pytest

from comotion.spatial import SpatialTransform, so3_exp


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_transform(rng):
    return SpatialTransform(so3_exp(rng.uniform(-1.5, 1.5, 3)), rng.uniform(-1, 1, 3))


@pytest.fixture
def make_transform(rng):
    return lambda: random_transform(rng)
