"""
Synthetic grayscale test textures

Gives the experiments a reproducible image set without external downloads.
All images are 0-255 and depend only on (size, seed).
"""

import logging
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
from scipy.ndimage import gaussian_filter

from models.domain_models import Image
from models.exceptions import InvalidParameterError
from services.file_handler import file_handler

logger = logging.getLogger(__name__)

TEXTURE_NAMES = ("checkerboard", "stripes", "ramp", "smooth_noise", "disks", "mixed")


def _checkerboard(size: int) -> np.ndarray:
    block = max(size // 6, 1)
    rows, cols = np.indices((size, size)) // block
    return np.where((rows + cols) % 2 == 0, 60.0, 200.0)


def _stripes(size: int) -> np.ndarray:
    cols = np.arange(size)
    return np.tile(128.0 + 80.0 * np.sin(2.0 * np.pi * cols / 8.0), (size, 1))


def _ramp(size: int) -> np.ndarray:
    ramp = np.linspace(20.0, 235.0, size)
    return np.tile(ramp, (size, 1))


def _smooth_noise(size: int, rng: np.random.Generator) -> np.ndarray:
    field = gaussian_filter(rng.standard_normal((size, size)), sigma=2.0, mode="reflect")
    field -= field.min()
    span = field.max()
    return 30.0 + 195.0 * (field / span if span > 0 else field)


def _disks(size: int, rng: np.random.Generator) -> np.ndarray:
    pixels = np.full((size, size), 50.0)
    rows, cols = np.indices((size, size))
    for _ in range(5):
        centre = rng.uniform(0, size, 2)
        radius = rng.uniform(size / 12, size / 5)
        inside = (rows - centre[0]) ** 2 + (cols - centre[1]) ** 2 <= radius ** 2
        pixels[inside] = rng.uniform(150.0, 230.0)
    return pixels


def synthetic_images(size: int = 60, seed: int = 0) -> Dict[str, Image]:
    """The texture set as in-memory images, keyed by name."""
    if size < 2:
        raise InvalidParameterError(f"Synthetic images need size >= 2, got {size}")
    rng = np.random.default_rng(seed)
    textures = {
        "checkerboard": _checkerboard(size),
        "stripes": _stripes(size),
        "ramp": _ramp(size),
        "smooth_noise": _smooth_noise(size, rng),
        "disks": _disks(size, rng),
    }
    mixed = textures["ramp"].copy()
    half = size // 2
    mixed[:, half:] = textures["disks"][:, half:]
    mixed[:half, :half] = textures["checkerboard"][:half, :half]
    textures["mixed"] = mixed
    return {name: Image(np.clip(textures[name], 0.0, 255.0), 255.0) for name in TEXTURE_NAMES}


def generate_test_images(out_dir: Union[str, Path], size: int = 60, seed: int = 0) -> List[Path]:
    """Write the texture set as PNG files and return their paths."""
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [
        file_handler.save_image(img, directory / f"{name}.png")
        for name, img in synthetic_images(size, seed).items()
    ]
    logger.info(f"Generated {len(paths)} synthetic images in {directory}")
    return paths
