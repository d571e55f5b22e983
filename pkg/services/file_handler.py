"""
File handling for images and experiment artifacts

Handles grayscale PGM/PNG input and output with validation, CSV result
tables with provenance lines, and the binary operator cache format.
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from PIL import Image as PILImage, UnidentifiedImageError

from config.configuration_manager import config_manager
from models.domain_models import Image
from models.exceptions import ImageFormatError, InvalidParameterError
from services.chebyshev_engine import ChebyshevExpansion
from services.nlm_operator import NlmOperator, operator_from_weights
from services.spectral_oracle import SpectralDecomposition

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
CSV_FLOAT_FORMAT = "%.9g"
OPERATOR_MAGIC = b"NLMOPv1\x00"
_OPERATOR_HEADER = struct.Struct("<8sQId")


@dataclass
class ValidationResult:
    """Result of file validation"""
    is_valid: bool
    errors: List[str]
    warnings: List[str]
    file_info: Optional[Dict[str, Any]] = None


class ImageFileHandler:
    """Reads, validates and writes grayscale images"""

    def __init__(self, allowed_extensions: Optional[List[str]] = None,
                 max_file_size: Optional[int] = None):
        self.allowed_extensions = allowed_extensions or config_manager.config.allowed_file_types
        self.max_file_size = max_file_size or config_manager.config.max_file_size

    def validate_image_path(self, path: PathLike) -> ValidationResult:
        """
        Validate an image file before loading

        Args:
            path: Image file path

        Returns:
            ValidationResult with validation status and details
        """
        errors = []
        warnings = []
        file_path = Path(path)
        file_info: Dict[str, Any] = {"path": str(file_path)}

        if not file_path.exists():
            errors.append(f"File does not exist: {file_path}")
            return ValidationResult(False, errors, warnings, file_info)
        if not file_path.is_file():
            errors.append(f"Not a regular file: {file_path}")
            return ValidationResult(False, errors, warnings, file_info)

        file_size = file_path.stat().st_size
        file_info["file_size"] = file_size
        if file_size == 0:
            errors.append("File is empty")
        if file_size > self.max_file_size:
            errors.append(
                f"File size ({file_size} bytes) exceeds maximum allowed size ({self.max_file_size} bytes)"
            )

        extension_validation = self._validate_extension(file_path)
        if not extension_validation[0]:
            errors.extend(extension_validation[1])

        if not errors:
            detected = self._detect_format(file_path)
            file_info["detected_format"] = detected
            if detected is None:
                errors.append("File content is neither PNG nor PGM")
            elif detected != file_path.suffix.lower().lstrip("."):
                warnings.append(f"File content ({detected}) doesn't match extension")

        return ValidationResult(len(errors) == 0, errors, warnings, file_info)

    def _validate_extension(self, file_path: Path) -> Tuple[bool, List[str]]:
        """Validate file extension"""
        errors = []
        extension = file_path.suffix.lower().lstrip(".")
        if not extension:
            errors.append("File has no extension")
        elif extension not in self.allowed_extensions:
            errors.append(
                f"File extension '{extension}' is not allowed. Allowed: {', '.join(self.allowed_extensions)}"
            )
        return len(errors) == 0, errors

    def _detect_format(self, file_path: Path) -> Optional[str]:
        """Detect image format from file header"""
        with open(file_path, "rb") as f:
            header = f.read(8)
        if header.startswith(b"\x89PNG\r\n\x1a\n"):
            return "png"
        if header[:2] in (b"P5", b"P2"):
            return "pgm"
        return None

    def load_image(self, path: PathLike) -> Image:
        """Load a grayscale image (colour converted by luma) with range 0-255"""
        validation = self.validate_image_path(path)
        if not validation.is_valid:
            raise ImageFormatError(f"Cannot load {path}: {'; '.join(validation.errors)}")
        for warning in validation.warnings:
            logger.warning(f"{path}: {warning}")

        try:
            with PILImage.open(path) as pil:
                pil.load()
                pixels = self._to_gray(pil)
        except (UnidentifiedImageError, OSError) as e:
            raise ImageFormatError(f"Cannot decode {path}: {e}") from e

        logger.info(f"Loaded {path} ({pixels.shape[1]}x{pixels.shape[0]})")
        return Image(pixels, 255.0)

    def _to_gray(self, pil: PILImage.Image) -> np.ndarray:
        if pil.mode == "L":
            return np.asarray(pil, dtype=np.float64)
        if pil.mode == "1":
            return np.asarray(pil.convert("L"), dtype=np.float64)
        if pil.mode in ("RGB", "RGBA", "P", "LA", "CMYK", "YCbCr"):
            rgb = np.asarray(pil.convert("RGB"), dtype=np.float64)
            return rgb @ LUMA_WEIGHTS
        raise ImageFormatError(f"Unsupported image mode {pil.mode}")

    def save_image(self, img: Image, path: PathLike) -> Path:
        """Write an 8-bit grayscale PNG or PGM; clamps to [0,255], rounds half-to-even"""
        file_path = Path(path)
        extension = file_path.suffix.lower().lstrip(".")
        if extension not in ("png", "pgm"):
            raise ImageFormatError(f"Unsupported output format '{extension}'")

        scaled = img.pixels * (255.0 / img.value_range)
        quantized = np.rint(np.clip(scaled, 0.0, 255.0)).astype(np.uint8)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        PILImage.fromarray(quantized).save(
            file_path, format="PNG" if extension == "png" else "PPM"
        )
        logger.info(f"Wrote image {file_path}")
        return file_path


def write_results_csv(table: pd.DataFrame, path: PathLike, provenance: Dict[str, Any]) -> Path:
    """Write a CSV with a provenance comment line, header, 9 significant digits, LF endings"""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    comment = "# " + " ".join(f"{key}={value}" for key, value in provenance.items())
    with open(file_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(comment.replace("\n", " ") + "\n")
        table.to_csv(f, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {len(table)} rows to {file_path}")
    return file_path


def read_results_csv(path: PathLike) -> pd.DataFrame:
    """Read a CSV written by write_results_csv"""
    return pd.read_csv(path, comment="#")


def save_operator(op: NlmOperator, path: PathLike) -> Path:
    """Binary cache: magic, n, p, h, then row-major W as little-endian float64"""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "wb") as f:
        f.write(_OPERATOR_HEADER.pack(OPERATOR_MAGIC, op.n, op.patch_size, op.h))
        f.write(np.ascontiguousarray(op.weights, dtype="<f8").tobytes())
    logger.info(f"Saved operator n={op.n} to {file_path}")
    return file_path


def load_operator(path: PathLike) -> NlmOperator:
    """Load an operator cache; D is recomputed from the row sums and validated"""
    with open(path, "rb") as f:
        header = f.read(_OPERATOR_HEADER.size)
        if len(header) != _OPERATOR_HEADER.size:
            raise InvalidParameterError(f"Truncated operator file: {path}")
        magic, n, p, h = _OPERATOR_HEADER.unpack(header)
        if magic != OPERATOR_MAGIC:
            raise InvalidParameterError(f"Not an operator file: {path}")
        payload = f.read()
    if len(payload) != n * n * 8:
        raise InvalidParameterError(f"Operator file {path} holds {len(payload)} bytes, expected {n * n * 8}")
    weights = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(n, n)
    logger.info(f"Loaded operator n={n} from {path}")
    return operator_from_weights(weights, p, h)


def save_expansion(expansion: ChebyshevExpansion, path: PathLike) -> Path:
    """Dump coefficients as CSV (index, coefficient)"""
    table = pd.DataFrame({
        "index": np.arange(expansion.coeffs.size),
        "coefficient": expansion.coeffs,
    })
    return write_results_csv(table, path, {"source": expansion.source, "N": expansion.degree})


def load_expansion(path: PathLike, source: Optional[str] = None) -> ChebyshevExpansion:
    """Load coefficients written by save_expansion"""
    table = read_results_csv(path).sort_values("index")
    coeffs = table["coefficient"].to_numpy(dtype=np.float64)
    return ChebyshevExpansion(coeffs=coeffs, source=source or f"csv:{Path(path).name}")


def save_spectrum(decomposition: SpectralDecomposition, path: PathLike) -> Path:
    """Eigenvalue spectrum as CSV (index, eigenvalue), descending"""
    table = pd.DataFrame({
        "index": np.arange(1, decomposition.n + 1),
        "eigenvalue": decomposition.eigenvalues,
    })
    return write_results_csv(table, path, {"n": decomposition.n, "solver": decomposition.solver})


# Global file handler instance
file_handler = ImageFileHandler()
