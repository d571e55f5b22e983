"""
Scalar spectral filters on [0, 1]

hard threshold  g(x)   = 0 if x < omega else x
Butterworth     fb(x)  = (1 + ((1-x)/(1-omega))^(2d))^(-1/2)
Slanted         fsb(x) = x * fb(x)

Any f with f(1) = 1 and f([0,1]) within [0,1] maps an NLM operator to an
extended NLM operator (eigenvalues in [0,1], constants preserved).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from models.domain_models import FilterKind, FilterSpec
from models.exceptions import DomainError, InvalidParameterError, SingularCutoffError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Above this exponent ratio^(2d) is handled in log space
_LOG_OVERFLOW = 300.0


@dataclass(frozen=True)
class SpectralFilter:
    """Vectorised scalar filter with a printable name"""
    func: Callable[[np.ndarray], np.ndarray]
    name: str

    def __call__(self, x: ArrayLike) -> np.ndarray:
        return self.func(np.asarray(x, dtype=np.float64))


@dataclass
class FilterCheckReport:
    """Outcome of checking f(1) = 1 and 0 <= f <= 1 on a grid"""
    passed: bool
    grid_size: int
    violation_x: Optional[float] = None
    violation_value: Optional[float] = None
    message: str = ""


def _check_domain(x: np.ndarray) -> None:
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("Filter argument must lie in [0, 1]")


def _check_cutoff(omega: float) -> None:
    if not (0.0 <= omega <= 1.0):
        raise InvalidParameterError(f"omega must lie in [0, 1], got {omega}")


def _scalar_or_array(values: np.ndarray, original: ArrayLike) -> ArrayLike:
    return float(values) if np.ndim(original) == 0 else values


def _butterworth_gain(x: np.ndarray, omega: float, d: int) -> np.ndarray:
    if omega >= 1.0:
        raise SingularCutoffError("Butterworth filters are undefined for omega = 1")
    ratio = (1.0 - x) / (1.0 - omega)
    with np.errstate(divide="ignore"):
        exponent = 2.0 * d * np.log(ratio)
    large = exponent > _LOG_OVERFLOW
    safe_ratio = np.where(large, 1.0, ratio)
    gain = (1.0 + safe_ratio ** (2 * d)) ** -0.5
    if np.any(large):
        # log1p(r^(2d)) = e + log1p(exp(-e)) for e = 2d log r
        big = exponent[large]
        gain = np.where(large, 0.0, gain)
        gain[large] = np.exp(-0.5 * (big + np.log1p(np.exp(-big))))
    return gain


def eval_hard_threshold(x: ArrayLike, omega: float) -> ArrayLike:
    """0 below the cutoff, identity at or above it."""
    _check_cutoff(omega)
    values = np.asarray(x, dtype=np.float64)
    _check_domain(values)
    return _scalar_or_array(np.where(values < omega, 0.0, values), x)


def eval_butterworth(x: ArrayLike, omega: float, d: int) -> ArrayLike:
    """Butterworth gain shifted to [0, 1]."""
    _check_cutoff(omega)
    values = np.asarray(x, dtype=np.float64)
    _check_domain(values)
    return _scalar_or_array(_butterworth_gain(np.atleast_1d(values), omega, d).reshape(values.shape), x)


def eval_slanted_butterworth(x: ArrayLike, omega: float, d: int) -> ArrayLike:
    """x times the Butterworth gain."""
    _check_cutoff(omega)
    values = np.asarray(x, dtype=np.float64)
    _check_domain(values)
    gain = _butterworth_gain(np.atleast_1d(values), omega, d).reshape(values.shape)
    return _scalar_or_array(values * gain, x)


def make_filter(spec: FilterSpec) -> SpectralFilter:
    """Vectorised filter for a FilterSpec."""
    if spec.kind is FilterKind.HARD_THRESHOLD:
        return SpectralFilter(lambda x: np.asarray(eval_hard_threshold(x, spec.omega)),
                              format_filter_spec(spec))
    if spec.omega >= 1.0:
        raise SingularCutoffError(f"{spec.kind.value} filter needs omega < 1")
    if spec.kind is FilterKind.BUTTERWORTH:
        return SpectralFilter(lambda x: np.asarray(eval_butterworth(x, spec.omega, spec.d)),
                              format_filter_spec(spec))
    return SpectralFilter(lambda x: np.asarray(eval_slanted_butterworth(x, spec.omega, spec.d)),
                          format_filter_spec(spec))


def identity_filter() -> SpectralFilter:
    return SpectralFilter(lambda x: np.array(x, dtype=np.float64, copy=True), "identity")


def resolve_filter(f: Union[FilterSpec, Callable, SpectralFilter]) -> SpectralFilter:
    """Accept a FilterSpec, a SpectralFilter or any vectorised callable."""
    if isinstance(f, SpectralFilter):
        return f
    if isinstance(f, FilterSpec):
        return make_filter(f)
    if callable(f):
        return SpectralFilter(lambda x: np.asarray(f(x), dtype=np.float64),
                              getattr(f, "__name__", "custom"))
    raise InvalidParameterError(f"Not a filter: {f!r}")


def compose_filters(outer, inner) -> SpectralFilter:
    """outer(inner(x)); closed under the extended-NLM conditions."""
    f, g = resolve_filter(outer), resolve_filter(inner)
    return SpectralFilter(lambda x: f(g(x)), f"{f.name}∘{g.name}")


def verify_filter_conditions(f, grid_size: int = 10_000, tol: float = 1e-12) -> FilterCheckReport:
    """
    Check f(1) = 1 and 0 <= f(x) <= 1 on a uniform grid over [0, 1]

    The endpoint condition is checked first; otherwise the smallest grid
    point violating the range condition is reported.
    """
    if grid_size < 2:
        raise InvalidParameterError("grid_size must be at least 2")
    flt = resolve_filter(f)

    at_one = float(np.asarray(flt(np.array([1.0])))[0])
    if not abs(at_one - 1.0) <= tol:
        return FilterCheckReport(False, grid_size, 1.0, at_one, f"f(1) = {at_one}, expected 1")

    grid = np.linspace(0.0, 1.0, grid_size)
    values = np.asarray(flt(grid), dtype=np.float64)
    bad = ~np.isfinite(values) | (values < -tol) | (values > 1.0 + tol)
    if np.any(bad):
        index = int(np.argmax(bad))
        x, value = float(grid[index]), float(values[index])
        return FilterCheckReport(False, grid_size, x, value, f"f({x}) = {value} outside [0, 1]")

    return FilterCheckReport(True, grid_size, message="ok")


_KIND_BY_PREFIX = {kind.value: kind for kind in FilterKind}


def parse_filter_spec(text: str) -> FilterSpec:
    """Parse `sb:omega=0.7,d=4`, `bw:omega=0.5,d=8` or `hard:omega=0.5`."""
    prefix, _, body = text.strip().partition(":")
    kind = _KIND_BY_PREFIX.get(prefix.strip().lower())
    if kind is None:
        raise InvalidParameterError(
            f"Unknown filter kind '{prefix}'. Expected one of {', '.join(_KIND_BY_PREFIX)}"
        )
    params = {}
    for item in filter(None, (part.strip() for part in body.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise InvalidParameterError(f"Malformed filter parameter '{item}' in '{text}'")
        params[key.strip().lower()] = value.strip()

    unknown = set(params) - {"omega", "d"}
    if unknown:
        raise InvalidParameterError(f"Unknown filter parameters: {', '.join(sorted(unknown))}")
    if "omega" not in params:
        raise InvalidParameterError(f"Filter '{text}' is missing omega")
    try:
        omega = float(params["omega"])
        d = int(params.get("d", "1"))
    except ValueError as e:
        raise InvalidParameterError(f"Malformed filter '{text}': {e}") from e
    if kind is not FilterKind.HARD_THRESHOLD and "d" not in params:
        raise InvalidParameterError(f"Filter '{text}' is missing the order d")
    return FilterSpec(kind=kind, omega=omega, d=d)


def format_filter_spec(spec: FilterSpec) -> str:
    if spec.kind is FilterKind.HARD_THRESHOLD:
        return f"hard:omega={spec.omega:g}"
    return f"{spec.kind.value}:omega={spec.omega:g},d={spec.d}"
