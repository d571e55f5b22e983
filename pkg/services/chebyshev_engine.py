"""
Chebyshev expansions of spectral filters and their matrix application

A filter f on [0, 1] is expanded as g(y) = f((y + 1) / 2) on [-1, 1]:

    S_N(f)(x) = sum_{j=0}^{N} alpha_j T_j(2x - 1)

with alpha_j = 2/(N+1) sum_k g(y_k) T_j(y_k) over the N+1 Gauss-Chebyshev
nodes y_k = cos(pi (k - 1/2) / (N + 1)), and alpha_0 stored already halved.
Because of that, the last Clenshaw step adds alpha_0 * y in full rather than
half of an unhalved leading coefficient.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Union

import numpy as np
from numpy.polynomial import chebyshev
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from config.configuration_manager import config_manager
from models.exceptions import (
    DegenerateOperatorError, DimensionMismatchError, DomainError,
    EvaluationError, InvalidParameterError
)
from services.nlm_operator import NlmOperator
from services.spectral_filters import resolve_filter
from services.spectral_oracle import SpectralDecomposition, apply_filtered_exact

logger = logging.getLogger(__name__)

OperatorLike = Union[NlmOperator, np.ndarray, LinearOperator]

DERIVATIVE_NODES = 10_000


@dataclass(frozen=True)
class ChebyshevExpansion:
    """Truncated Chebyshev series alpha_0..alpha_N on the mapped domain"""
    coeffs: np.ndarray
    source: str = "custom"
    tolerance: float = math.nan

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=np.float64, copy=True).reshape(-1)
        if coeffs.size < 2:
            raise InvalidParameterError("An expansion needs at least two coefficients (N >= 1)")
        if not np.all(np.isfinite(coeffs)):
            raise EvaluationError("Expansion coefficients must be finite")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1


def cheb_coefficients(f, N: int) -> ChebyshevExpansion:
    """
    Gauss-Chebyshev coefficients of a filter on [0, 1]

    Args:
        f: FilterSpec or vectorised callable on [0, 1]
        N: Truncation degree (N + 1 quadrature nodes)

    Returns:
        ChebyshevExpansion; tolerance holds |S_N(1) - f(1)|
    """
    if int(N) != N or N < 1:
        raise InvalidParameterError(f"Chebyshev degree must be a positive integer, got {N}")
    N = int(N)
    flt = resolve_filter(f)

    def on_reference_interval(y: np.ndarray) -> np.ndarray:
        values = np.asarray(flt(np.clip((y + 1.0) / 2.0, 0.0, 1.0)), dtype=np.float64)
        bad = ~np.isfinite(values)
        if np.any(bad):
            # chebpts1 is ascending; nodes are numbered from y = 1 down
            j = int(np.flatnonzero(bad)[-1])
            raise EvaluationError(
                f"Filter {flt.name} is not finite at node {y.size - j} (y={y[j]:.17g}, x={(y[j] + 1) / 2:.17g})"
            )
        return values

    # alpha_0 comes back halved, ready for chebval and Clenshaw
    coeffs = chebyshev.chebinterpolate(on_reference_interval, N)

    at_one = float(np.asarray(flt(np.array([1.0])))[0])
    tolerance = abs(float(chebyshev.chebval(1.0, coeffs)) - at_one)
    logger.debug(f"Expanded {flt.name} to degree {N}; error at x=1 is {tolerance:.3e}")
    return ChebyshevExpansion(coeffs=coeffs, source=flt.name, tolerance=tolerance)


def cheb_eval_scalar(exp: ChebyshevExpansion, x):
    """S_N(f)(x) by the scalar Clenshaw recurrence on y = 2x - 1."""
    values = np.asarray(x, dtype=np.float64)
    if np.any(~np.isfinite(values)) or np.any(values < 0.0) or np.any(values > 1.0):
        raise DomainError("Expansion argument must lie in [0, 1]")
    result = chebyshev.chebval(2.0 * values - 1.0, exp.coeffs)
    return float(result) if values.ndim == 0 else result


def _matvec_provider(op: OperatorLike, n_rows: int) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(op, NlmOperator):
        size, apply = op.n, op.apply
    elif isinstance(op, np.ndarray):
        size, apply = op.shape[0], op.__matmul__
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise DimensionMismatchError(f"Operator matrix must be square, got {op.shape}")
    else:
        linear = aslinearoperator(op)
        if linear.shape[0] != linear.shape[1]:
            raise DimensionMismatchError(f"Operator must be square, got {linear.shape}")
        size = linear.shape[0]

        def apply(v: np.ndarray) -> np.ndarray:
            return linear.matvec(v) if v.ndim == 1 else linear.matmat(v)
    if size != n_rows:
        raise DimensionMismatchError(f"Operator of size {size} cannot act on {n_rows} rows")
    return apply


def _prepare_vector(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim not in (1, 2):
        raise DimensionMismatchError(f"Expected a vector or an (n, k) block, got shape {y.shape}")
    return y


def clenshaw_matvec(op: OperatorLike, exp: ChebyshevExpansion, y: np.ndarray) -> np.ndarray:
    """
    S_N(f, A) y = sum_j alpha_j T_j(2A - I) y by the matrix Clenshaw recursion

    Only products with T = 2A - I are formed (N of them). Accepts a single
    vector or an (n, k) block, which is carried through matmat.
    """
    y = _prepare_vector(y)
    apply = _matvec_provider(op, y.shape[0])
    coeffs = exp.coeffs

    def shifted(v: np.ndarray) -> np.ndarray:
        return 2.0 * apply(v) - v

    d = coeffs[-1] * y
    dd = np.zeros_like(y)
    for alpha in coeffs[-2:0:-1]:
        d, dd = 2.0 * shifted(d) - dd + alpha * y, d
    return shifted(d) - dd + coeffs[0] * y


def cheb_matvec_forward(op: OperatorLike, exp: ChebyshevExpansion, y: np.ndarray) -> np.ndarray:
    """Same sum by the forward three-term recursion T_j = 2T T_{j-1} - T_{j-2}."""
    y = _prepare_vector(y)
    apply = _matvec_provider(op, y.shape[0])
    coeffs = exp.coeffs

    previous = y
    current = 2.0 * apply(y) - y
    total = coeffs[0] * previous + coeffs[1] * current
    for alpha in coeffs[2:]:
        previous, current = current, 2.0 * (2.0 * apply(current) - current) - previous
        total = total + alpha * current
    return total


def _check_bound_arguments(deriv_norm: float, m: int, N: int) -> None:
    if int(m) != m or m < 1:
        raise InvalidParameterError(f"Smoothness order m must be a positive integer, got {m}")
    if N <= m:
        raise InvalidParameterError(f"Bound needs N > m, got N={N}, m={m}")
    if deriv_norm < 0 or not math.isfinite(deriv_norm):
        raise InvalidParameterError(f"Derivative norm must be finite and non-negative, got {deriv_norm}")


def _bound_constant(deriv_norm: float, m: int, N: int) -> float:
    return (2.0 / (math.pi * m)) * deriv_norm / float(N - m) ** m


def truncation_bound(deriv_norm: float, m: int, N: int, kappa: float) -> float:
    """Spectral-norm truncation bound C/(N-m)^m * kappa(D^1/2), C = 2/(pi m) ||f^(m+1)||_T."""
    _check_bound_arguments(deriv_norm, m, N)
    if kappa < 1:
        raise InvalidParameterError(f"Condition number must be at least 1, got {kappa}")
    return _bound_constant(deriv_norm, m, N) * kappa


def truncation_bound_frobenius(deriv_norm: float, m: int, N: int, kappa_f: float, n: int) -> float:
    """Frobenius variant: sqrt(n) C/(N-m)^m * kappa_F(D^1/2)."""
    _check_bound_arguments(deriv_norm, m, N)
    if kappa_f < 1 or n < 1:
        raise InvalidParameterError("kappa_F must be at least 1 and n positive")
    return _bound_constant(deriv_norm, m, N) * math.sqrt(n) * kappa_f


def apriori_bound(deriv_norm: float, m: int, N: int, n: int):
    """(spectral, Frobenius) bounds using kappa <= sqrt(n) and kappa_F <= n."""
    _check_bound_arguments(deriv_norm, m, N)
    if n < 1:
        raise InvalidParameterError(f"n must be positive, got {n}")
    constant = _bound_constant(deriv_norm, m, N)
    return constant * math.sqrt(n), constant * n ** 1.5


def derivative_norm(f, m: int = 1, nodes: int = DERIVATIVE_NODES) -> float:
    """
    Numerical ||g^(m+1)||_T = int |g^(m+1)(t)| / sqrt(1 - t^2) dt on [-1, 1]

    g(t) = f((t + 1) / 2). Derivatives come from repeated second-order
    finite differences on nodes + 1 uniform points; the weighted integral
    uses t = cos(theta) and the midpoint rule in theta.
    """
    if int(m) != m or m < 0:
        raise InvalidParameterError(f"m must be a non-negative integer, got {m}")
    if nodes < 10:
        raise InvalidParameterError("derivative_norm needs at least 10 nodes")
    flt = resolve_filter(f)
    t = np.linspace(-1.0, 1.0, nodes + 1)
    derivative = np.asarray(flt((t + 1.0) / 2.0), dtype=np.float64)
    for _ in range(m + 1):
        derivative = np.gradient(derivative, t, edge_order=2)
    theta = math.pi * (np.arange(nodes) + 0.5) / nodes
    samples = np.interp(np.cos(theta), t, np.abs(derivative))
    return float(math.pi / nodes * np.sum(samples))


def max_scalar_error(exp: ChebyshevExpansion, f, points) -> float:
    """max |S_N(f)(x) - f(x)| over the given points in [0, 1]."""
    points = np.clip(np.asarray(points, dtype=np.float64).reshape(-1), 0.0, 1.0)
    exact = np.asarray(resolve_filter(f)(points), dtype=np.float64)
    return float(np.max(np.abs(cheb_eval_scalar(exp, points) - exact)))


def relative_truncation_error(decomp: SpectralDecomposition, f, N: int,
                              probes: Optional[int] = None, seed: int = 0,
                              reduce: Literal["max", "mean"] = "max") -> float:
    """
    ||S_N(f,A) v - f(A) v|| / ||f(A) v|| over seeded random unit probes v

    Args:
        decomp: Decomposition carrying the operator it was built from
        f: FilterSpec or vectorised callable
        N: Chebyshev degree
        probes: Number of probe vectors (default from configuration, 16)
        seed: Probe generator seed
        reduce: "max" or "mean" over the probes
    """
    if decomp.operator is None:
        raise InvalidParameterError("Decomposition has no operator attached")
    if reduce not in ("max", "mean"):
        raise InvalidParameterError(f"Unknown reduction '{reduce}'")
    count = probes or config_manager.config.probe_count

    flt = resolve_filter(f)
    expansion = cheb_coefficients(flt, N)
    rng = np.random.default_rng(seed)
    vectors = rng.standard_normal((decomp.n, count))
    vectors /= np.linalg.norm(vectors, axis=0)

    approx = clenshaw_matvec(decomp.operator, expansion, vectors)
    exact = apply_filtered_exact(decomp, flt, vectors)
    exact_norms = np.linalg.norm(exact, axis=0)
    usable = exact_norms > 0
    if not np.any(usable):
        raise DegenerateOperatorError("f(A) v vanished for every probe vector")

    ratios = np.linalg.norm(approx - exact, axis=0)[usable] / exact_norms[usable]
    return float(np.max(ratios) if reduce == "max" else np.mean(ratios))
