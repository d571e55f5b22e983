"""
End-to-end denoising schemes

    nlm      x = A y
    eig      x = A_k y (rank-k spectral truncation)
    sb       x = S_N(f_sb, A) y via Clenshaw
    sb2      two SB stages with the stage-1 output mixed back into the noisy input

Images stay unclipped real arrays; quantization only happens on export.
"""

import logging
from typing import Optional

from config.configuration_manager import config_manager
from models.domain_models import FilterKind, FilterSpec, Image, Sb2Config
from services.chebyshev_engine import cheb_coefficients, clenshaw_matvec
from services.nlm_operator import apply_operator, build_nlm_operator
from services.spectral_filters import format_filter_spec
from services.spectral_oracle import apply_rank_truncated, decompose_nlm

logger = logging.getLogger(__name__)

PIPELINES = ("nlm", "eig", "sb", "sb2")

_mixing_notice_logged = False


def _log_mixing_interpretation() -> None:
    global _mixing_notice_logged
    if not _mixing_notice_logged:
        logger.warning("NLM-SB2 mixes the stage-1 estimate with the noisy input image")
        _mixing_notice_logged = True


def denoise_nlm(img: Image, p: int, h: float, max_n: Optional[int] = None) -> Image:
    """Plain NLM: IMAGE(A COL(img))."""
    op = build_nlm_operator(img, p, h, max_n=max_n)
    return img.with_column(apply_operator(op, img.column()))


def denoise_nlm_eig(img: Image, p: int, h: float, k: int,
                    max_n: Optional[int] = None, solver: Optional[str] = None) -> Image:
    """NLM with the operator truncated to its k leading eigenpairs."""
    op = build_nlm_operator(img, p, h, max_n=max_n)
    decomposition = decompose_nlm(op, solver=solver)
    return img.with_column(apply_rank_truncated(decomposition, k, img.column()))


def denoise_nlm_filtered(img: Image, p: int, h: float, spec: FilterSpec,
                         N: Optional[int] = None, max_n: Optional[int] = None) -> Image:
    """
    Apply S_N(f, A) for any filter spec to the image

    Args:
        img: Noisy image
        p: Patch side
        h: Kernel width
        spec: Filter (hard threshold, Butterworth or slanted Butterworth)
        N: Chebyshev degree (default from configuration)
        max_n: Dense capacity cap

    Returns:
        Denoised image in the input's declared range
    """
    degree = N or config_manager.config.cheb_degree
    expansion = cheb_coefficients(spec, degree)
    op = build_nlm_operator(img, p, h, max_n=max_n)
    logger.info(f"Filtering n={op.n} with {format_filter_spec(spec)} at N={degree}")
    return img.with_column(clenshaw_matvec(op, expansion, img.column()))


def denoise_nlm_sb(img: Image, p: int, h: float, omega: float, d: int,
                   N: Optional[int] = None, max_n: Optional[int] = None) -> Image:
    """NLM-SB: slanted Butterworth filtering of the NLM operator."""
    spec = FilterSpec(FilterKind.SLANTED_BUTTERWORTH, omega, d)
    return denoise_nlm_filtered(img, p, h, spec, N=N, max_n=max_n)


def denoise_nlm_sb2(img: Image, cfg: Sb2Config, max_n: Optional[int] = None) -> Image:
    """Two-stage NLM-SB; the stage-2 operator is built from the mixed image."""
    first = denoise_nlm_sb(img, cfg.p, cfg.h1, cfg.omega1, cfg.d1, cfg.N, max_n=max_n)
    if cfg.gamma > 0:
        _log_mixing_interpretation()
    mixed = img.with_column((1.0 - cfg.gamma) * first.column() + cfg.gamma * img.column())
    return denoise_nlm_sb(mixed, cfg.p, cfg.h2, cfg.omega2, cfg.d2, cfg.N, max_n=max_n)
