"""
Image processing primitives: noise synthesis, quality metrics, patches and resizing

All intensities are float64. Noise is drawn from numpy's PCG64 generator
(`numpy.random.default_rng(seed)`), so a seed reproduces the same noise
field on every machine.
"""

import logging
import math
from typing import Literal

import numpy as np

from models.domain_models import Image, NoiseModel
from models.exceptions import (
    DegenerateImageError, DimensionMismatchError, InvalidParameterError
)

logger = logging.getLogger(__name__)

PsnrMode = Literal["standard", "paper-eq10", "unnormalized"]
UNNORMALIZED_MODES = ("paper-eq10", "unnormalized")

PEAK = 255.0
KEYS_A = -0.5


def add_gaussian_noise(img: Image, noise: NoiseModel) -> Image:
    """Return img + N(0, sigma^2) i.i.d. noise, unclipped."""
    if noise.sigma == 0:
        return img
    rng = np.random.default_rng(noise.seed)
    # Noise is drawn in row-major order so pixel i always receives the i-th sample
    samples = rng.standard_normal(img.n).reshape(img.height, img.width)
    return Image(img.pixels + noise.sigma * samples, img.value_range)


def sigma_for_snr(img: Image, snr: float) -> float:
    """Noise standard deviation giving SNR = std(img) / sigma."""
    if img.n < 2:
        raise InvalidParameterError("sigma_for_snr needs an image with at least 2 pixels")
    if not (snr > 0 and math.isfinite(snr)):
        raise InvalidParameterError(f"snr must be a positive real, got {snr}")
    spread = float(np.std(img.pixels))
    if spread == 0.0:
        raise DegenerateImageError("Constant image has zero intensity spread; SNR is undefined")
    return spread / snr


def psnr(a: Image, b: Image, mode: PsnrMode = "standard") -> float:
    """
    Peak signal-to-noise ratio on the 0-255 scale.

    `standard` uses the mean squared error; `paper-eq10` (alias
    `unnormalized`) uses the plain sum of squared differences. Identical
    images give math.inf.
    """
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatchError(
            f"PSNR needs identical dimensions, got {a.pixels.shape} and {b.pixels.shape}"
        )
    if a.value_range != b.value_range:
        raise DimensionMismatchError("PSNR needs identical declared ranges")

    scale = PEAK / a.value_range
    squared = np.sum(((a.pixels - b.pixels) * scale) ** 2)
    if mode == "standard":
        error = squared / a.n
    elif mode in UNNORMALIZED_MODES:
        error = squared
    else:
        raise InvalidParameterError(f"Unknown PSNR mode: {mode}")

    if error == 0:
        return math.inf
    return 20.0 * math.log10(PEAK / math.sqrt(error))


def normalized(img: Image) -> Image:
    """Rescale intensities to the unit range (divide by the declared range)."""
    if img.value_range == 1.0:
        return img
    return Image(img.pixels / img.value_range, 1.0)


def clip_to_range(img: Image) -> Image:
    """Clamp intensities into [0, declared range]."""
    return Image(np.clip(img.pixels, 0.0, img.value_range), img.value_range)


def _check_patch_side(p: int) -> None:
    if int(p) != p or p < 1 or p % 2 == 0:
        raise InvalidParameterError(f"Patch side must be a positive odd integer, got {p}")


def patch_matrix(img: Image, p: int) -> np.ndarray:
    """All p x p patches (mirror padded) as rows of an (n, p*p) array, row-major."""
    _check_patch_side(p)
    r = p // 2
    padded = np.pad(img.pixels, r, mode="symmetric")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (p, p))
    return np.ascontiguousarray(windows.reshape(img.n, p * p))


def extract_patch_vector(img: Image, i: int, p: int) -> np.ndarray:
    """The p x p window centred at row-major pixel index i, mirror padded."""
    _check_patch_side(p)
    if not (0 <= i < img.n):
        raise InvalidParameterError(f"Pixel index {i} outside image of {img.n} pixels")
    r = p // 2
    row, col = divmod(i, img.width)
    padded = np.pad(img.pixels, r, mode="symmetric")
    return padded[row:row + p, col:col + p].reshape(-1).copy()


def _keys_kernel(t: np.ndarray, a: float = KEYS_A) -> np.ndarray:
    t = np.abs(t)
    t2, t3 = t * t, t * t * t
    near = (a + 2) * t3 - (a + 3) * t2 + 1
    far = a * t3 - 5 * a * t2 + 8 * a * t - 4 * a
    return np.where(t <= 1, near, np.where(t < 2, far, 0.0))


def _mirror_index(idx: np.ndarray, size: int) -> np.ndarray:
    """Symmetric (edge-repeating) reflection of indices into [0, size)."""
    if size == 1:
        return np.zeros_like(idx)
    period = 2 * size
    idx = np.mod(idx, period)
    return np.where(idx >= size, period - 1 - idx, idx)


def _resample_matrix(old: int, new: int) -> np.ndarray:
    """(new, old) matrix of Keys weights mapping pixel centres old -> new."""
    weights = np.zeros((new, old))
    centres = (np.arange(new) + 0.5) * (old / new) - 0.5
    base = np.floor(centres).astype(int)
    for offset in range(-1, 3):
        taps = base + offset
        w = _keys_kernel(centres - taps)
        np.add.at(weights, (np.arange(new), _mirror_index(taps, old)), w)
    return weights


def resize_bicubic(img: Image, new_w: int, new_h: int) -> Image:
    """Separable Keys bicubic (a = -0.5) resampling with mirror boundary."""
    if new_w < 1 or new_h < 1:
        raise InvalidParameterError(f"Target size must be at least 1x1, got {new_w}x{new_h}")
    if (new_w, new_h) == (img.width, img.height):
        return img
    rows = _resample_matrix(img.height, new_h)
    cols = _resample_matrix(img.width, new_w)
    logger.debug(f"Resizing {img.width}x{img.height} -> {new_w}x{new_h}")
    return Image(rows @ img.pixels @ cols.T, img.value_range)
