"""
Experiment harness: kernel-width sweeps, cutoff sweeps, Chebyshev error
curves and the pipeline comparison

Work items (image, snr, seed) run independently on a thread pool. Rows are
sorted by a canonical key before writing so the CSV bytes do not depend on
the number of workers. A failing item becomes a row with an `error` value
and the run continues.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from config.configuration_manager import config_manager, read_flat_config
from models.domain_models import (
    ExperimentConfig, FilterKind, FilterSpec, Image, NoiseModel, Sb2Config, nearest_key,
    cutoff_defaults
)
from models.exceptions import CapacityError, InvalidParameterError
from services.chebyshev_engine import (
    cheb_coefficients, clenshaw_matvec, derivative_norm, relative_truncation_error, truncation_bound
)
from services.file_handler import file_handler, write_results_csv
from services.image_processing import add_gaussian_noise, psnr, resize_bicubic, sigma_for_snr
from services.nlm_operator import build_nlm_operator, condition_numbers
from services.pipelines import (
    PIPELINES, denoise_nlm, denoise_nlm_eig, denoise_nlm_sb, denoise_nlm_sb2
)
from services.spectral_oracle import (
    SpectralDecomposition, decompose_nlm, random_nlm_operator
)

logger = logging.getLogger(__name__)

TOOL_VERSION = "spectral-nlm/1.0.0"

KERNEL_SWEEP_COLUMNS = ["image", "snr", "seed", "h", "psnr_nlm", "best_k", "psnr_eig", "error"]
CUTOFF_SWEEP_COLUMNS = ["image", "snr", "seed", "h", "d", "method", "cutoff",
                        "psnr_nlm", "psnr", "gain", "error"]
CUTOFF_SUMMARY_COLUMNS = ["snr", "method", "cutoff", "mean_gain", "count"]
CHEB_ERROR_COLUMNS = ["d", "N", "mean_rel_error", "max_rel_error", "mean_bound"]
COMPARISON_COLUMNS = ["image", "snr", "seed", "psnr_noisy", "psnr_nlm", "psnr_eig",
                      "psnr_sb", "psnr_sb2", "error"]
AVERAGE_LABEL = "Average"

SB2_FIELDS = ("p", "h1", "h2", "omega1", "omega2", "d1", "d2", "gamma", "N")


@dataclass
class ExperimentOutput:
    """Result table of an experiment and the files it wrote"""
    table: pd.DataFrame
    paths: List[Path] = field(default_factory=list)


@dataclass
class DenoiseResult:
    """Outcome of a single `denoise` run"""
    output_path: Path
    pipeline: str
    psnr_noisy: Optional[float] = None
    psnr_denoised: Optional[float] = None
    noisy_path: Optional[Path] = None


@dataclass(frozen=True)
class WorkItem:
    path: Path
    snr: float
    seed: int

    @property
    def name(self) -> str:
        return self.path.stem


def validate_experiment_config(cfg: ExperimentConfig, needs_images: bool = True) -> None:
    """Collect every problem with the config and raise them together."""
    errors = []
    if needs_images:
        if not cfg.images:
            errors.append("no input images")
        for path in cfg.images:
            if not Path(path).is_file():
                errors.append(f"image not readable: {path}")
        if not cfg.snr_levels:
            errors.append("no SNR levels")
        if any(not (snr > 0 and math.isfinite(snr)) for snr in cfg.snr_levels):
            errors.append("SNR levels must be positive")
    if not cfg.seeds:
        errors.append("no seeds")
    for name in ("kernel_widths", "ranks", "omegas", "orders", "cheb_degrees"):
        if not getattr(cfg, name):
            errors.append(f"empty parameter grid: {name}")
    if any(h <= 0 for h in cfg.kernel_widths):
        errors.append("kernel widths must be positive")
    if any(k < 1 for k in cfg.ranks):
        errors.append("ranks must be at least 1")
    if any(not (0 <= w < 1) for w in cfg.omegas):
        errors.append("cutoffs must lie in [0, 1)")
    if cfg.patch_size < 1 or cfg.patch_size % 2 == 0:
        errors.append("patch size must be a positive odd integer")
    if cfg.image_size < 2:
        errors.append("image size must be at least 2")
    if cfg.workers < 1:
        errors.append("workers must be at least 1")
    if errors:
        raise InvalidParameterError("Invalid experiment config: " + "; ".join(errors))


def _check_max_n(n: int, cfg: ExperimentConfig) -> None:
    if n > cfg.max_n:
        raise CapacityError(
            f"Experiment needs operators of size n={n} but --max-n is {cfg.max_n}", n, cfg.max_n
        )


def _work_items(cfg: ExperimentConfig) -> List[WorkItem]:
    return [
        WorkItem(Path(path), float(snr), int(seed))
        for path in cfg.images for snr in cfg.snr_levels for seed in cfg.seeds
    ]


def _load_clean(path: Path, size: int) -> Image:
    return resize_bicubic(file_handler.load_image(path), size, size)


def _noisy(clean: Image, snr: float, seed: int) -> Image:
    return add_gaussian_noise(clean, NoiseModel(sigma_for_snr(clean, snr), seed))


def _run_items(items: Sequence[WorkItem], task: Callable[[WorkItem], List[Dict[str, Any]]],
               workers: int) -> List[Dict[str, Any]]:
    """Run task per item; exceptions become error rows."""
    def guarded(item: WorkItem) -> List[Dict[str, Any]]:
        try:
            return task(item)
        except Exception as e:
            logger.warning(f"{item.name} snr={item.snr} seed={item.seed} failed: {e}")
            return [{"image": item.name, "snr": item.snr, "seed": item.seed,
                     "error": f"{type(e).__name__}: {e}"}]

    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(guarded, items))
    else:
        chunks = [guarded(item) for item in items]
    return [row for chunk in chunks for row in chunk]


def _table(rows: Iterable[Dict[str, Any]], columns: List[str], sort_by: List[str]) -> pd.DataFrame:
    table = pd.DataFrame(list(rows), columns=columns)
    if "error" in table.columns:
        table["error"] = table["error"].fillna("")
    if not table.empty:
        table = table.sort_values(sort_by, kind="mergesort", na_position="last")
    return table.reset_index(drop=True)


def _provenance(command: str, cfg: ExperimentConfig, **grids: Any) -> Dict[str, Any]:
    def joined(values: Iterable[Any]) -> str:
        return ";".join(str(v) for v in values)

    provenance = {"tool": TOOL_VERSION, "command": command,
                  "seeds": joined(cfg.seeds), "patch": cfg.patch_size}
    provenance.update({key: joined(value) if isinstance(value, (list, tuple)) else value
                       for key, value in grids.items()})
    return provenance


def _output_directory(cfg: ExperimentConfig) -> Path:
    return config_manager.ensure_output_directory(cfg.output_directory)


def best_rank(decomposition: SpectralDecomposition, noisy: Image, clean: Image,
              ranks: Sequence[int]) -> Tuple[int, float]:
    """
    Rank with the highest PSNR against the clean image

    Ranks above n are skipped; ties go to the smaller rank.
    """
    usable = sorted({int(k) for k in ranks if 1 <= k <= decomposition.n})
    if not usable:
        raise InvalidParameterError(f"No rank in the grid fits an operator of size {decomposition.n}")
    coords = decomposition.project(noisy.column())
    best_k, best_psnr = usable[0], -math.inf
    for k in usable:
        estimate = decomposition.restore(decomposition.eigenvalues[:k] * coords[:k], columns=k)
        value = psnr(clean, noisy.with_column(estimate))
        if value > best_psnr:
            best_k, best_psnr = k, value
    return best_k, best_psnr


def run_kernel_sweep(cfg: ExperimentConfig) -> ExperimentOutput:
    """PSNR of NLM and of the best low-rank NLM-Eig per kernel width."""
    validate_experiment_config(cfg)
    _check_max_n(cfg.image_size ** 2, cfg)
    items = _work_items(cfg)
    logger.info(f"Kernel sweep: {len(items)} work items x {len(cfg.kernel_widths)} kernel widths")

    def task(item: WorkItem) -> List[Dict[str, Any]]:
        clean = _load_clean(item.path, cfg.image_size)
        noisy = _noisy(clean, item.snr, item.seed)
        rows = []
        for h in cfg.kernel_widths:
            op = build_nlm_operator(noisy, cfg.patch_size, h, max_n=cfg.max_n)
            psnr_nlm = psnr(clean, noisy.with_column(op.apply(noisy.column())))
            k, psnr_eig = best_rank(decompose_nlm(op), noisy, clean, cfg.ranks)
            rows.append({"image": item.name, "snr": item.snr, "seed": item.seed, "h": h,
                         "psnr_nlm": psnr_nlm, "best_k": k, "psnr_eig": psnr_eig, "error": ""})
        return rows

    table = _table(_run_items(items, task, cfg.workers), KERNEL_SWEEP_COLUMNS,
                   ["image", "snr", "seed", "h"])
    path = write_results_csv(table, _output_directory(cfg) / "kernel_sweep.csv",
                             _provenance("sweep-kernel", cfg, h=cfg.kernel_widths, ranks=cfg.ranks,
                                         snr=cfg.snr_levels, size=cfg.image_size))
    return ExperimentOutput(table, [path])


def _cutoff_parameters(cfg: ExperimentConfig, snr: float) -> Tuple[float, int]:
    h, d = cutoff_defaults(snr)
    return (cfg.kernel_width or h), (cfg.order or d)


def run_cutoff_sweep(cfg: ExperimentConfig) -> ExperimentOutput:
    """
    PSNR gain over plain NLM as a function of the cutoff

    NLM-Eig is swept over the rank grid, NLM-SB over the omega grid. A
    summary with the mean gain per (snr, method, cutoff) is written next
    to the main table.
    """
    validate_experiment_config(cfg)
    n = cfg.image_size ** 2
    _check_max_n(n, cfg)
    items = _work_items(cfg)
    logger.info(f"Cutoff sweep: {len(items)} work items")

    def task(item: WorkItem) -> List[Dict[str, Any]]:
        h, d = _cutoff_parameters(cfg, item.snr)
        clean = _load_clean(item.path, cfg.image_size)
        noisy = _noisy(clean, item.snr, item.seed)
        y = noisy.column()
        op = build_nlm_operator(noisy, cfg.patch_size, h, max_n=cfg.max_n)
        psnr_nlm = psnr(clean, noisy.with_column(op.apply(y)))
        base = {"image": item.name, "snr": item.snr, "seed": item.seed, "h": h, "d": d,
                "psnr_nlm": psnr_nlm, "error": ""}

        rows = []
        decomposition = decompose_nlm(op)
        coords = decomposition.project(y)
        for k in sorted({int(k) for k in cfg.ranks if k <= op.n}):
            estimate = decomposition.restore(decomposition.eigenvalues[:k] * coords[:k], columns=k)
            value = psnr(clean, noisy.with_column(estimate))
            rows.append({**base, "method": "eig", "cutoff": float(k), "psnr": value,
                         "gain": value - psnr_nlm})
        for omega in cfg.omegas:
            expansion = cheb_coefficients(FilterSpec(FilterKind.SLANTED_BUTTERWORTH, omega, d),
                                          cfg.cheb_degree)
            value = psnr(clean, noisy.with_column(clenshaw_matvec(op, expansion, y)))
            rows.append({**base, "method": "sb", "cutoff": float(omega), "psnr": value,
                         "gain": value - psnr_nlm})
        return rows

    table = _table(_run_items(items, task, cfg.workers), CUTOFF_SWEEP_COLUMNS,
                   ["image", "snr", "seed", "method", "cutoff"])
    directory = _output_directory(cfg)
    provenance = _provenance("sweep-cutoff", cfg, ranks=cfg.ranks, omegas=cfg.omegas,
                             snr=cfg.snr_levels, N=cfg.cheb_degree, size=cfg.image_size)
    path = write_results_csv(table, directory / "cutoff_sweep.csv", provenance)

    summary = summarize_gains(table)
    summary_path = write_results_csv(summary, directory / "cutoff_summary.csv", provenance)
    return ExperimentOutput(table, [path, summary_path])


def summarize_gains(table: pd.DataFrame) -> pd.DataFrame:
    """Mean PSNR gain per (snr, method, cutoff) over images and seeds."""
    valid = table[table["error"] == ""] if "error" in table.columns else table
    if valid.empty:
        return pd.DataFrame(columns=CUTOFF_SUMMARY_COLUMNS)
    grouped = valid.groupby(["snr", "method", "cutoff"], sort=True)["gain"]
    summary = grouped.agg(mean_gain="mean", count="count").reset_index()
    return summary[CUTOFF_SUMMARY_COLUMNS]


def run_cheb_error_experiment(cfg: ExperimentConfig) -> ExperimentOutput:
    """
    Mean relative truncation error of S_N(f_sb, A) over random NLM operators

    Operators are NLM operators of seeded uniform noise images. Alongside
    the measured error the table reports the mean a-posteriori bound with
    m = 1 and the numerically measured derivative norm.
    """
    validate_experiment_config(cfg, needs_images=False)
    _check_max_n(cfg.operator_size, cfg)
    if cfg.operator_count < 1:
        raise InvalidParameterError("operator_count must be at least 1")
    if any(N < 2 for N in cfg.cheb_degrees):
        raise InvalidParameterError("Chebyshev degrees must be at least 2")

    seed_base = int(cfg.seeds[0])
    specs = {d: FilterSpec(FilterKind.SLANTED_BUTTERWORTH, cfg.error_omega, d) for d in cfg.orders}
    norms = {d: derivative_norm(spec, m=1) for d, spec in specs.items()}
    logger.info(
        f"Chebyshev error experiment: {cfg.operator_count} operators of size {cfg.operator_size}"
    )

    def task(index: int) -> Dict[Tuple[int, int], Tuple[float, float]]:
        op = random_nlm_operator(cfg.operator_size, seed_base + index, cfg.patch_size,
                                 cfg.operator_h, max_n=max(cfg.max_n, cfg.operator_size))
        decomposition = decompose_nlm(op)
        kappa, _ = condition_numbers(op)
        return {
            (d, N): (
                relative_truncation_error(decomposition, specs[d], N, probes=cfg.probe_count,
                                          seed=seed_base + index),
                truncation_bound(norms[d], 1, N, kappa),
            )
            for d in cfg.orders for N in cfg.cheb_degrees
        }

    indices = range(cfg.operator_count)
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(task, indices))
    else:
        results = [task(i) for i in indices]

    rows = []
    for d in sorted(cfg.orders):
        for N in sorted(cfg.cheb_degrees):
            errors = np.array([result[(d, N)][0] for result in results])
            bounds = np.array([result[(d, N)][1] for result in results])
            rows.append({"d": d, "N": N, "mean_rel_error": float(errors.mean()),
                         "max_rel_error": float(errors.max()), "mean_bound": float(bounds.mean())})
    table = pd.DataFrame(rows, columns=CHEB_ERROR_COLUMNS)
    path = write_results_csv(
        table, _output_directory(cfg) / "cheb_error.csv",
        _provenance("cheb-error", cfg, omega=cfg.error_omega, orders=cfg.orders,
                    N=cfg.cheb_degrees, operators=cfg.operator_count, n=cfg.operator_size,
                    h=cfg.operator_h, probes=cfg.probe_count),
    )
    return ExperimentOutput(table, [path])


def comparison_rank(cfg: ExperimentConfig, snr: float, n: int) -> int:
    """NLM-Eig rank used by the comparison at a noise level."""
    return min(cfg.comparison_ranks[nearest_key(cfg.comparison_ranks, snr)], n)


def run_comparison(cfg: ExperimentConfig) -> ExperimentOutput:
    """
    PSNR of NLM, NLM-Eig, NLM-SB and NLM-SB2 per image, noise level and seed

    NLM, NLM-Eig and NLM-SB use the stage-1 parameters of the SB2 preset for
    the noise level. Denoised images are written as PNG under `denoised/`,
    and one average row per noise level closes the table.
    """
    validate_experiment_config(cfg)
    n = cfg.image_size ** 2
    _check_max_n(n, cfg)
    items = _work_items(cfg)
    directory = _output_directory(cfg)
    image_directory = directory / "denoised"
    logger.info(f"Comparison: {len(items)} work items")

    def task(item: WorkItem) -> List[Dict[str, Any]]:
        preset = Sb2Config.for_snr(item.snr)
        clean = _load_clean(item.path, cfg.image_size)
        noisy = _noisy(clean, item.snr, item.seed)
        k = comparison_rank(cfg, item.snr, noisy.n)
        outputs = {
            "nlm": denoise_nlm(noisy, preset.p, preset.h1, max_n=cfg.max_n),
            "eig": denoise_nlm_eig(noisy, preset.p, preset.h1, k, max_n=cfg.max_n),
            "sb": denoise_nlm_sb(noisy, preset.p, preset.h1, preset.omega1, preset.d1,
                                 preset.N, max_n=cfg.max_n),
            "sb2": denoise_nlm_sb2(noisy, preset, max_n=cfg.max_n),
        }
        row = {"image": item.name, "snr": item.snr, "seed": item.seed,
               "psnr_noisy": psnr(clean, noisy), "error": ""}
        stem = f"{item.name}_snr{item.snr:g}_seed{item.seed}"
        for method, estimate in outputs.items():
            row[f"psnr_{method}"] = psnr(clean, estimate)
            file_handler.save_image(estimate, image_directory / f"{stem}_{method}.png")
        return [row]

    table = _table(_run_items(items, task, cfg.workers), COMPARISON_COLUMNS,
                   ["image", "snr", "seed"])
    table = pd.concat([table, average_rows(table)], ignore_index=True)
    path = write_results_csv(table, directory / "comparison.csv",
                             _provenance("compare", cfg, snr=cfg.snr_levels, size=cfg.image_size))
    return ExperimentOutput(table, [path])


def average_rows(table: pd.DataFrame) -> pd.DataFrame:
    """One row per noise level averaging the PSNR columns over successful rows."""
    valid = table[table["error"] == ""]
    psnr_columns = [c for c in COMPARISON_COLUMNS if c.startswith("psnr_")]
    if valid.empty:
        return pd.DataFrame(columns=COMPARISON_COLUMNS)
    averages = valid.groupby("snr", sort=True)[psnr_columns].mean().reset_index()
    averages["image"] = AVERAGE_LABEL
    averages["seed"] = np.nan
    averages["error"] = ""
    return averages[COMPARISON_COLUMNS]


def load_sb2_config(path: Union[str, Path]) -> Sb2Config:
    """Sb2Config from a flat key=value file using the field names p, h1, ..., N."""
    values = read_flat_config(path)
    unknown = set(values) - set(SB2_FIELDS)
    if unknown:
        raise InvalidParameterError(f"Unknown SB2 settings: {', '.join(sorted(unknown))}")
    defaults = Sb2Config()
    kwargs = {}
    for name in SB2_FIELDS:
        if name in values:
            caster = type(getattr(defaults, name))
            try:
                kwargs[name] = caster(values[name])
            except ValueError as e:
                raise InvalidParameterError(f"Invalid value for {name}: {values[name]}") from e
    return Sb2Config(**kwargs)


def run_denoise(image_path: Union[str, Path], pipeline: str, out_dir: Union[str, Path],
                p: int = 5, h: float = 1.0, rank: Optional[int] = None,
                omega: float = 0.3, order: int = 4, N: Optional[int] = None,
                snr: Optional[float] = None, seed: int = 0,
                clean_path: Optional[Union[str, Path]] = None,
                sb2: Optional[Sb2Config] = None,
                max_n: Optional[int] = None) -> DenoiseResult:
    """
    Denoise one image with one pipeline and write the result as PNG

    With `snr` the input is taken as clean: seeded noise is added first and
    both PSNR values are reported against it. With `clean_path` the input is
    taken as noisy and compared with that reference.
    """
    if pipeline not in PIPELINES:
        raise InvalidParameterError(f"Unknown pipeline '{pipeline}'. Expected one of {', '.join(PIPELINES)}")
    if snr is not None and clean_path is not None:
        raise InvalidParameterError("Give either --snr or a clean reference, not both")

    source = Path(image_path)
    directory = config_manager.ensure_output_directory(Path(out_dir))
    image = file_handler.load_image(source)
    reference, noisy_path = None, None
    if snr is not None:
        reference = image
        image = _noisy(image, snr, seed)
        noisy_path = file_handler.save_image(image, directory / f"{source.stem}_noisy.png")
    elif clean_path is not None:
        reference = file_handler.load_image(clean_path)

    if pipeline == "nlm":
        estimate = denoise_nlm(image, p, h, max_n=max_n)
    elif pipeline == "eig":
        estimate = denoise_nlm_eig(image, p, h, rank or image.n, max_n=max_n)
    elif pipeline == "sb":
        estimate = denoise_nlm_sb(image, p, h, omega, order, N, max_n=max_n)
    else:
        config = sb2 or (Sb2Config.for_snr(snr) if snr is not None else Sb2Config())
        estimate = denoise_nlm_sb2(image, config, max_n=max_n)

    output = file_handler.save_image(estimate, directory / f"{source.stem}_{pipeline}.png")
    result = DenoiseResult(output_path=output, pipeline=pipeline, noisy_path=noisy_path)
    if reference is not None:
        result.psnr_noisy = psnr(reference, image)
        result.psnr_denoised = psnr(reference, estimate)
        logger.info(f"PSNR noisy {result.psnr_noisy:.2f} dB -> {pipeline} {result.psnr_denoised:.2f} dB")
    return result
