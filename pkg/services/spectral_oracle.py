"""
Exact spectral decomposition of NLM operators

A = D^-1 W is conjugate to the symmetric S = D^-1/2 W D^-1/2, so
A = D^-1/2 O diag(lambda) O^T D^1/2 with O orthogonal. The oracle is used as
the NLM-Eig backend, as the exact f(A) reference and to generate random
operators for the truncation-error experiments.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from config.configuration_manager import config_manager
from models.domain_models import Image
from models.exceptions import (
    CapacityError, ContractViolationError, DimensionMismatchError, InvalidParameterError
)
from services.nlm_operator import NlmOperator, build_nlm_operator
from services.spectral_filters import resolve_filter

logger = logging.getLogger(__name__)

JACOBI_TOLERANCE = 1e-12
JACOBI_MAX_SWEEPS = 30
SYMMETRY_TOLERANCE = 1e-12
CLAMP_LOG_THRESHOLD = 1e-9


@dataclass(frozen=True)
class SpectralDecomposition:
    """A = diag(1/d_sqrt) @ vectors @ diag(eigenvalues) @ vectors.T @ diag(d_sqrt)"""
    n: int
    eigenvalues: np.ndarray
    vectors: np.ndarray
    d_sqrt: np.ndarray
    solver: str
    operator: Optional[NlmOperator] = None

    def project(self, y: np.ndarray) -> np.ndarray:
        """Coordinates O^T D^1/2 y"""
        y = np.asarray(y, dtype=np.float64)
        if y.shape[0] != self.n or y.ndim > 2:
            raise DimensionMismatchError(f"Decomposition of size {self.n} cannot act on shape {y.shape}")
        scaled = y * self.d_sqrt if y.ndim == 1 else y * self.d_sqrt[:, None]
        return self.vectors.T @ scaled

    def restore(self, coords: np.ndarray, columns: Optional[int] = None) -> np.ndarray:
        """D^-1/2 O coords, optionally using only the leading columns of O"""
        basis = self.vectors if columns is None else self.vectors[:, :columns]
        result = basis @ coords
        return result / self.d_sqrt if result.ndim == 1 else result / self.d_sqrt[:, None]


def symmetrize(op: NlmOperator) -> np.ndarray:
    """S_ij = W_ij / sqrt(D_ii D_jj), bit-exactly symmetric."""
    inv_root = 1.0 / np.sqrt(op.degrees)
    s = op.weights * inv_root[:, None] * inv_root[None, :]
    return np.triu(s) + np.triu(s, 1).T


def _round_robin(n: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Disjoint (p, q) index pairs covering every pair once per sweep (circle method)"""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        if pairs:
            p, q = zip(*sorted(pairs))
            rounds.append((np.array(p), np.array(q)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _off_diagonal_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def _sorted_descending(values: np.ndarray, vectors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # Ties keep the lower original index first
    order = np.lexsort((np.arange(values.size), -values))
    return values[order], vectors[:, order]


def _check_symmetric(s: np.ndarray) -> None:
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ContractViolationError(f"Eigensolver needs a square matrix, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ContractViolationError("Eigensolver input has non-finite entries")
    asymmetry = float(np.max(np.abs(s - s.T))) if s.size else 0.0
    if asymmetry > SYMMETRY_TOLERANCE:
        raise ContractViolationError(f"Eigensolver input is not symmetric (max asymmetry {asymmetry:.3e})")


def jacobi_eigh(s: np.ndarray, max_n: Optional[int] = None,
                tol: float = JACOBI_TOLERANCE,
                max_sweeps: int = JACOBI_MAX_SWEEPS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cyclic Jacobi eigensolver for dense symmetric matrices

    Each sweep visits every off-diagonal pair once, in a fixed round-robin
    order where the rotations of one round touch disjoint rows and run
    together. Stops when the off-diagonal Frobenius norm drops below
    tol * ||S||_F or after max_sweeps sweeps.

    Returns:
        (eigenvalues descending, orthonormal eigenvectors as columns)
    """
    s = np.asarray(s, dtype=np.float64)
    _check_symmetric(s)
    n = s.shape[0]
    cap = max_n or config_manager.config.jacobi_max_n
    if n > cap:
        raise CapacityError(f"Jacobi eigensolver size n={n} exceeds the cap of {cap}", n, cap)

    a = np.array(s, copy=True)
    v = np.eye(n)
    threshold = tol * float(np.linalg.norm(a))
    rounds = _round_robin(n)

    sweeps = 0
    off = _off_diagonal_norm(a)
    while off > threshold and sweeps < max_sweeps:
        sweeps += 1
        for p_all, q_all in rounds:
            apq = a[p_all, q_all]
            active = apq != 0.0
            if not np.any(active):
                continue
            p, q, apq = p_all[active], q_all[active], apq[active]
            tau = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            sn = t * c

            rows_p, rows_q = a[p, :], a[q, :]
            a[p, :] = c[:, None] * rows_p - sn[:, None] * rows_q
            a[q, :] = sn[:, None] * rows_p + c[:, None] * rows_q
            cols_p, cols_q = a[:, p], a[:, q]
            a[:, p] = cols_p * c - cols_q * sn
            a[:, q] = cols_p * sn + cols_q * c
            a[p, q] = 0.0
            a[q, p] = 0.0

            vec_p, vec_q = v[:, p], v[:, q]
            v[:, p] = vec_p * c - vec_q * sn
            v[:, q] = vec_p * sn + vec_q * c
        off = _off_diagonal_norm(a)
        logger.debug(f"Jacobi sweep {sweeps}: off-diagonal norm {off:.3e}")

    if off > threshold:
        logger.warning(f"Jacobi stopped after {sweeps} sweeps with off-diagonal norm {off:.3e}")
    else:
        logger.info(f"Jacobi converged in {sweeps} sweeps (n={n})")
    return _sorted_descending(np.diag(a).copy(), v)


def _resolve_solver(solver: Optional[str], n: int) -> str:
    cfg = config_manager.config
    name = solver or cfg.eig_solver
    if name == "auto":
        return "jacobi" if n <= cfg.jacobi_auto_n else "lapack"
    if name not in ("jacobi", "lapack"):
        raise InvalidParameterError(f"Unknown eigensolver '{name}'. Expected auto, jacobi or lapack")
    return name


def decompose_nlm(op: NlmOperator, solver: Optional[str] = None,
                  max_n: Optional[int] = None) -> SpectralDecomposition:
    """
    Eigendecomposition of an NLM operator through its symmetric conjugate

    Args:
        op: NLM operator
        solver: "jacobi", "lapack" or "auto" (Jacobi up to jacobi_auto_n)
        max_n: Oracle capacity cap

    Returns:
        Immutable SpectralDecomposition with eigenvalues sorted descending
    """
    cap = max_n or config_manager.get_oracle_max_n()
    if op.n > cap:
        raise CapacityError(f"Spectral oracle size n={op.n} exceeds the cap of {cap}", op.n, cap)

    name = _resolve_solver(solver, op.n)
    s = symmetrize(op)
    if name == "jacobi":
        eigenvalues, vectors = jacobi_eigh(s)
    else:
        values, vecs = linalg.eigh(s)
        eigenvalues, vectors = _sorted_descending(values, vecs)

    d_sqrt = np.sqrt(op.degrees)
    for array in (eigenvalues, vectors, d_sqrt):
        array.flags.writeable = False
    logger.info(
        f"Decomposed operator n={op.n} with {name}: "
        f"lambda_1={eigenvalues[0]:.12f} lambda_n={eigenvalues[-1]:.3e}"
    )
    return SpectralDecomposition(
        n=op.n, eigenvalues=eigenvalues, vectors=vectors, d_sqrt=d_sqrt, solver=name, operator=op
    )


def apply_rank_truncated(dec: SpectralDecomposition, k: int, y: np.ndarray) -> np.ndarray:
    """Apply A with all but the k largest eigenvalues set to zero."""
    if int(k) != k or not (1 <= k <= dec.n):
        raise InvalidParameterError(f"Rank k must lie in [1, {dec.n}], got {k}")
    k = int(k)
    coords = dec.project(y)[:k]
    scale = dec.eigenvalues[:k] if coords.ndim == 1 else dec.eigenvalues[:k, None]
    return dec.restore(scale * coords, columns=k)


def _clamped_eigenvalues(dec: SpectralDecomposition) -> np.ndarray:
    lam = dec.eigenvalues
    drift = max(0.0, -float(lam.min()), float(lam.max()) - 1.0)
    if drift > CLAMP_LOG_THRESHOLD:
        logger.warning(f"Clamping eigenvalues into [0, 1]; drift {drift:.3e}")
    return np.clip(lam, 0.0, 1.0)


def apply_filtered_exact(dec: SpectralDecomposition, f, y: np.ndarray) -> np.ndarray:
    """f(A) y = D^-1/2 O f(Lambda) O^T D^1/2 y for a filter spec or vectorised callable."""
    gains = np.asarray(resolve_filter(f)(_clamped_eigenvalues(dec)), dtype=np.float64)
    coords = dec.project(y)
    return dec.restore(gains * coords if coords.ndim == 1 else gains[:, None] * coords)


def filtered_matrix(dec: SpectralDecomposition, f) -> np.ndarray:
    """Dense f(A); small n only."""
    return apply_filtered_exact(dec, f, np.eye(dec.n))


def random_nlm_operator(n: int, seed: int, p: int = 5, h: float = 0.7,
                        max_n: Optional[int] = None) -> NlmOperator:
    """NLM operator of a seeded sqrt(n) x sqrt(n) uniform white-noise image."""
    side = math.isqrt(n) if n >= 0 else 0
    if n < 1 or side * side != n:
        raise InvalidParameterError(f"Random operator size must be a positive perfect square, got {n}")
    cap = max_n or config_manager.get_oracle_max_n()
    if n > cap:
        raise CapacityError(f"Random operator size n={n} exceeds the oracle cap of {cap}", n, cap)
    rng = np.random.default_rng(seed)
    img = Image(rng.uniform(0.0, 1.0, size=(side, side)), 1.0)
    return build_nlm_operator(img, p, h, max_n=max(cap, n))
