"""
Core domain models for the spectral NLM denoising toolkit
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from models.exceptions import InvalidParameterError

logger = logging.getLogger(__name__)

# Low-rank grid K used by the kernel-width experiments (truncated to values <= n at use)
DEFAULT_RANK_GRID: Tuple[int, ...] = (
    1, 5, 10, 15, 20, 25, 50, 75, 100, 125, 150, 175, 200,
    225, 250, 275, 300, 400, 600, 1200, 2000, 3000, 3600,
)

# Kernel width and filter order per SNR for the cutoff experiments
CUTOFF_DEFAULTS: Dict[float, Tuple[float, int]] = {
    0.5: (1.5, 15),
    0.75: (1.0, 4),
    1.0: (0.5, 4),
}


def nearest_key(table: Dict[float, object], snr: float) -> float:
    key = min(table, key=lambda k: (abs(k - snr), k))
    if not math.isclose(key, snr):
        logger.warning(f"No preset for SNR={snr}; using the preset for SNR={key}")
    return key


def cutoff_defaults(snr: float) -> Tuple[float, int]:
    """Kernel width h and SB order d used for a given noise level."""
    return CUTOFF_DEFAULTS[nearest_key(CUTOFF_DEFAULTS, snr)]


@dataclass(frozen=True)
class Image:
    """Grayscale image with a declared nominal range (255 or 1)"""
    pixels: np.ndarray
    value_range: float = 255.0

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=np.float64, copy=True)
        if pixels.ndim != 2:
            raise InvalidParameterError(f"Image pixels must be 2-D, got shape {pixels.shape}")
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise InvalidParameterError("Image must be at least 1x1")
        if not np.all(np.isfinite(pixels)):
            raise InvalidParameterError("Image intensities must be finite")
        if self.value_range not in (1.0, 255.0):
            raise InvalidParameterError(f"Declared range must be 1 or 255, got {self.value_range}")
        pixels.flags.writeable = False
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "value_range", float(self.value_range))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def n(self) -> int:
        return self.pixels.size

    def column(self) -> np.ndarray:
        """Row-major flattening (COL)"""
        return self.pixels.reshape(-1).copy()

    def with_column(self, values: np.ndarray) -> "Image":
        """Inverse of column() (IMAGE), keeping the declared range"""
        return Image(np.asarray(values, dtype=np.float64).reshape(self.height, self.width),
                     self.value_range)


@dataclass(frozen=True)
class NoiseModel:
    """Additive white Gaussian noise"""
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.sigma):
            raise InvalidParameterError(f"sigma must be finite, got {self.sigma}")
        if self.sigma < 0:
            raise InvalidParameterError(f"sigma must be non-negative, got {self.sigma}")


class FilterKind(Enum):
    """Scalar spectral filter families"""
    HARD_THRESHOLD = "hard"
    BUTTERWORTH = "bw"
    SLANTED_BUTTERWORTH = "sb"


@dataclass(frozen=True)
class FilterSpec:
    """Scalar spectral filter with cutoff omega and order d"""
    kind: FilterKind
    omega: float
    d: int = 1

    def __post_init__(self):
        if not (0.0 <= self.omega <= 1.0):
            raise InvalidParameterError(f"omega must lie in [0, 1], got {self.omega}")
        if int(self.d) != self.d or self.d < 1:
            raise InvalidParameterError(f"filter order d must be a positive integer, got {self.d}")
        object.__setattr__(self, "d", int(self.d))


@dataclass(frozen=True)
class Sb2Config:
    """Parameters of the two-stage NLM-SB2 scheme"""
    p: int = 5
    h1: float = 1.5
    h2: float = 1.0
    omega1: float = 0.3
    omega2: float = 0.3
    d1: int = 50
    d2: int = 50
    gamma: float = 0.5
    N: int = 150

    def __post_init__(self):
        errors = []
        if not (0.0 <= self.gamma <= 1.0):
            errors.append("gamma must lie in [0, 1]")
        if self.h1 <= 0 or self.h2 <= 0:
            errors.append("kernel widths must be positive")
        if self.N < 1:
            errors.append("N must be at least 1")
        if self.p < 1 or self.p % 2 == 0:
            errors.append("p must be a positive odd integer")
        for name in ("omega1", "omega2"):
            if not (0.0 <= getattr(self, name) < 1.0):
                errors.append(f"{name} must lie in [0, 1)")
        for name in ("d1", "d2"):
            if getattr(self, name) < 1:
                errors.append(f"{name} must be a positive integer")
        if errors:
            raise InvalidParameterError("Invalid Sb2Config: " + "; ".join(errors))

    @classmethod
    def for_snr(cls, snr: float) -> "Sb2Config":
        """Preset parameters for SNR 0.5, 0.75 or 1 (nearest preset otherwise)"""
        return SB2_PRESETS[nearest_key(SB2_PRESETS, snr)]


SB2_PRESETS: Dict[float, Sb2Config] = {
    0.5: Sb2Config(p=5, h1=1.5, h2=1.0, omega1=0.3, omega2=0.3, d1=50, d2=50, gamma=0.5, N=150),
    0.75: Sb2Config(p=5, h1=1.05, h2=0.35, omega1=0.3, omega2=0.3, d1=15, d2=15, gamma=0.15, N=150),
    1.0: Sb2Config(p=5, h1=0.5, h2=0.3, omega1=0.3, omega2=0.3, d1=4, d2=4, gamma=0.15, N=150),
}


@dataclass
class ExperimentConfig:
    """Inputs and parameter grids of an experiment run"""
    images: List[Path] = field(default_factory=list)
    snr_levels: List[float] = field(default_factory=lambda: [0.5, 0.75, 1.0])
    seeds: List[int] = field(default_factory=lambda: [0])
    kernel_widths: List[float] = field(default_factory=lambda: [0.3, 0.5, 0.75, 1.0, 1.5])
    ranks: List[int] = field(default_factory=lambda: list(DEFAULT_RANK_GRID))
    omegas: List[float] = field(
        default_factory=lambda: [round(0.05 * i, 2) for i in range(1, 20)]
    )
    orders: List[int] = field(default_factory=lambda: [4, 8, 16])
    cheb_degrees: List[int] = field(default_factory=lambda: [20, 40, 60, 80, 100, 150, 200, 250, 300])
    patch_size: int = 5
    cheb_degree: int = 150
    image_size: int = 60
    output_directory: Path = Path("results")
    max_n: int = 8192
    workers: int = 1
    operator_count: int = 50
    operator_size: int = 400
    operator_h: float = 0.7
    error_omega: float = 0.7
    probe_count: int = 16
    kernel_width: Optional[float] = None
    order: Optional[int] = None
    comparison_ranks: Dict[float, int] = field(
        default_factory=lambda: {0.5: 25, 0.75: 50, 1.0: 100}
    )
