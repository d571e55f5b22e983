"""
Non-Local Means operator A = D^-1 W

W_ij = exp(-||v(N_i) - v(N_j)||^2 / (2 h^2 p^2)) on intensities rescaled to
[0, 1]. The p^2 divisor keeps h comparable across patch sizes; the
"unscaled" normalization drops it. W is dense, symmetric and computed once
per unordered pixel pair, so W == W.T holds bit for bit.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import psutil
from scipy.spatial.distance import cdist
from scipy.sparse.linalg import LinearOperator

from config.configuration_manager import config_manager
from models.domain_models import Image
from models.exceptions import CapacityError, DimensionMismatchError, InvalidParameterError
from services.image_processing import normalized, patch_matrix

logger = logging.getLogger(__name__)

_ROW_BLOCK = 512


@dataclass(frozen=True)
class NlmOperator:
    """Row-stochastic denoising operator with its weights and degrees"""
    weights: np.ndarray
    degrees: np.ndarray
    patch_size: int
    h: float

    @property
    def n(self) -> int:
        return self.degrees.size

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n, self.n)

    @property
    def dtype(self):
        return self.weights.dtype

    def apply(self, y: np.ndarray) -> np.ndarray:
        """D^-1 (W y) for a vector or an (n, k) block of vectors"""
        y = np.asarray(y, dtype=np.float64)
        if y.shape[0] != self.n or y.ndim > 2:
            raise DimensionMismatchError(f"Operator of size {self.n} cannot act on shape {y.shape}")
        product = self.weights @ y
        if y.ndim == 1:
            return product / self.degrees
        return product / self.degrees[:, None]

    def matvec(self, y: np.ndarray) -> np.ndarray:
        return self.apply(y)

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator(self.shape, matvec=self.apply, matmat=self.apply, dtype=np.float64)

    def dense(self) -> np.ndarray:
        """The explicit matrix A (for small n only)"""
        return self.weights / self.degrees[:, None]


def _check_capacity(n: int, max_n: int) -> None:
    if n > max_n:
        raise CapacityError(
            f"Operator size n={n} exceeds the dense cap of {max_n}; raise --max-n to allow it",
            n, max_n,
        )
    required = n * n * 8
    available = psutil.virtual_memory().available
    if required > available:
        logger.warning(
            f"Dense operator needs {required / 1024 ** 2:.0f} MB but only "
            f"{available / 1024 ** 2:.0f} MB are available"
        )


def _fill_block(weights: np.ndarray, patches: np.ndarray, start: int, stop: int, scale: float) -> None:
    # Upper-triangle rows [start, stop) and their mirror; blocks touch disjoint regions
    distances = cdist(patches[start:stop], patches[start:], metric="sqeuclidean")
    block = np.exp(-distances / scale)
    weights[start:stop, start:] = block
    weights[start:, start:stop] = block.T


def operator_from_weights(weights: np.ndarray, patch_size: int, h: float) -> NlmOperator:
    """Wrap a weight matrix, recomputing and validating the degrees."""
    weights = np.array(weights, dtype=np.float64, copy=True)
    n = weights.shape[0]
    if weights.shape != (n, n):
        raise DimensionMismatchError(f"Weight matrix must be square, got {weights.shape}")
    if not np.array_equal(weights, weights.T):
        raise InvalidParameterError("Weight matrix is not symmetric")
    if np.any(weights < 0) or np.any(weights > 1):
        raise InvalidParameterError("Weights must lie in [0, 1]")
    degrees = weights.sum(axis=1)
    if np.any(degrees < 1) or np.any(degrees > n):
        raise InvalidParameterError("Degrees must lie in [1, n]")
    weights.flags.writeable = False
    degrees.flags.writeable = False
    return NlmOperator(weights=weights, degrees=degrees, patch_size=patch_size, h=float(h))


def build_nlm_operator(img: Image, p: int, h: float,
                       distance_normalization: Optional[str] = None,
                       max_n: Optional[int] = None,
                       workers: Optional[int] = None) -> NlmOperator:
    """
    Construct the NLM operator of an image

    Args:
        img: Image in any declared range (rescaled to [0,1] internally)
        p: Odd patch side
        h: Kernel width on normalized intensities
        distance_normalization: "patch" (divide by p^2) or "unscaled" (no divisor)
        max_n: Dense capacity cap
        workers: Threads used for row blocks

    Returns:
        Immutable NlmOperator
    """
    if not (h > 0 and math.isfinite(h)):
        raise InvalidParameterError(f"Kernel width h must be positive, got {h}")
    cfg = config_manager.config
    mode = distance_normalization or cfg.distance_normalization
    if mode not in ("patch", "unscaled"):
        raise InvalidParameterError(f"Unknown distance normalization: {mode}")
    _check_capacity(img.n, max_n or config_manager.get_dense_max_n())

    patches = patch_matrix(normalized(img), p)
    n = img.n
    scale = 2.0 * h * h * (p * p if mode == "patch" else 1)
    weights = np.empty((n, n))
    starts = range(0, n, _ROW_BLOCK)
    worker_count = workers or cfg.workers

    if worker_count > 1 and n > _ROW_BLOCK:
        with ThreadPoolExecutor(max_workers=worker_count) as pool:
            list(pool.map(
                lambda s: _fill_block(weights, patches, s, min(s + _ROW_BLOCK, n), scale), starts
            ))
    else:
        for start in starts:
            _fill_block(weights, patches, start, min(start + _ROW_BLOCK, n), scale)

    degrees = weights.sum(axis=1)
    weights.flags.writeable = False
    degrees.flags.writeable = False
    logger.info(f"Built NLM operator n={n} p={p} h={h} normalization={mode}")
    return NlmOperator(weights=weights, degrees=degrees, patch_size=p, h=float(h))


def apply_operator(op: NlmOperator, y: np.ndarray) -> np.ndarray:
    """x_hat = A y"""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.size != op.n:
        raise DimensionMismatchError(f"Expected a vector of length {op.n}, got shape {y.shape}")
    return op.apply(y)


def condition_numbers(op: NlmOperator) -> Tuple[float, float]:
    """(kappa(D^1/2), kappa_F(D^1/2)) computed from the degree diagonal."""
    root = np.sqrt(op.degrees)
    kappa = float(root.max() / root.min())
    kappa_f = float(math.sqrt(op.degrees.sum() / np.sum(1.0 / op.degrees)))
    return kappa, kappa_f
