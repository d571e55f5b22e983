import numpy as np
import pytest

from models.domain_models import Image


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run slow experiment tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def two_pixel_image():
    """2x1 image with values 0 and 255"""
    return Image(np.array([[0.0, 255.0]]), 255.0)


@pytest.fixture
def constant_image():
    return Image(np.full((6, 6), 117.0), 255.0)


@pytest.fixture
def noise_image():
    """12x12 uniform noise on the unit range"""
    rng = np.random.default_rng(3)
    return Image(rng.uniform(0.0, 1.0, size=(12, 12)), 1.0)


@pytest.fixture
def textured_image():
    """16x16 checkerboard with a ramp, 0-255"""
    rows, cols = np.indices((16, 16))
    pixels = np.where(((rows // 4) + (cols // 4)) % 2 == 0, 70.0, 190.0) + 2.0 * cols
    return Image(pixels, 255.0)
