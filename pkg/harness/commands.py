"""
Command-line surface

    python run.py denoise IMAGE --pipeline sb --h 1.0 --omega 0.3 --order 4
    python run.py sweep-kernel --images data/ --snr 0.5 --h 0.3,0.5,1.0
    python run.py sweep-cutoff --images data/ --snr 0.5,0.75,1
    python run.py cheb-error --order 4,8,16 --cheb-n 20,40,80,150
    python run.py compare --images data/ --snr 0.5 --seed 0,1,2
    python run.py gen-images --out data/

List-valued flags take comma separated values. `--config FILE` reads a flat
key=value file whose keys mirror the flag names; flags win over the file.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from config.configuration_manager import config_manager, read_flat_config
from models.domain_models import ExperimentConfig
from models.exceptions import DenoiseError
from services.experiment_runner import (
    ExperimentOutput, load_sb2_config, run_cheb_error_experiment, run_comparison,
    run_cutoff_sweep, run_denoise, run_kernel_sweep
)
from services.pipelines import PIPELINES
from utils.synthetic_images import generate_test_images

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
IMAGE_SUFFIXES = (".png", ".pgm")

# Flag destinations that may also come from a --config file
SETTING_NAMES = (
    "images", "pipeline", "patch", "h", "rank", "omega", "order", "cheb_n", "snr", "seed",
    "max_n", "out", "workers", "size", "operators", "operator_size", "probes", "clean",
    "sb2_config",
)


def _floats(text: str) -> List[float]:
    return [float(item) for item in str(text).split(",") if item.strip()]


def _ints(text: str) -> List[int]:
    return [int(item) for item in str(text).split(",") if item.strip()]


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Flat key=value settings file")
    parser.add_argument("--patch", help="Patch side p (odd)")
    parser.add_argument("--h", help="Kernel width(s)")
    parser.add_argument("--snr", help="SNR level(s)")
    parser.add_argument("--seed", help="Noise seed(s)")
    parser.add_argument("--max-n", dest="max_n", help="Dense operator capacity guard")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--workers", help="Worker threads")
    parser.add_argument("--log-level", dest="log_level", help="Logging level")


def parse_arguments(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="spectral-nlm", description="Spectral NLM denoising and experiments"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    denoise = commands.add_parser("denoise", help="Denoise one image with one pipeline")
    denoise.add_argument("image", help="Input image (PNG or PGM)")
    denoise.add_argument("--pipeline", choices=PIPELINES)
    denoise.add_argument("--rank", help="Rank k for the eig pipeline")
    denoise.add_argument("--omega", help="Cutoff for the sb pipeline")
    denoise.add_argument("--order", help="Filter order d for the sb pipeline")
    denoise.add_argument("--cheb-n", dest="cheb_n", help="Chebyshev degree N")
    denoise.add_argument("--clean", help="Clean reference for PSNR")
    denoise.add_argument("--sb2-config", dest="sb2_config", help="Two-stage parameter file")
    _add_common_arguments(denoise)

    for name, help_text in (("sweep-kernel", "PSNR versus kernel width"),
                            ("sweep-cutoff", "PSNR gain versus cutoff"),
                            ("compare", "Compare the four pipelines")):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--images", help="Image files or directories")
        sub.add_argument("--rank", help="Rank grid")
        sub.add_argument("--omega", help="Cutoff grid")
        sub.add_argument("--order", help="Filter order")
        sub.add_argument("--cheb-n", dest="cheb_n", help="Chebyshev degree N")
        sub.add_argument("--size", help="Side of the resized square images")
        _add_common_arguments(sub)

    cheb = commands.add_parser("cheb-error", help="Chebyshev truncation error on random operators")
    cheb.add_argument("--omega", help="Filter cutoff")
    cheb.add_argument("--order", help="Filter orders")
    cheb.add_argument("--cheb-n", dest="cheb_n", help="Chebyshev degrees")
    cheb.add_argument("--operators", help="Number of random operators")
    cheb.add_argument("--operator-size", dest="operator_size", help="Operator size n (square)")
    cheb.add_argument("--probes", help="Probe vectors per operator")
    _add_common_arguments(cheb)

    gen = commands.add_parser("gen-images", help="Write the synthetic test images")
    gen.add_argument("--size", help="Image side")
    _add_common_arguments(gen)

    return parser.parse_args(argv)


def merge_settings(args: argparse.Namespace) -> Dict[str, str]:
    """Flag values over --config file values; keys use flag spelling with underscores."""
    settings: Dict[str, str] = {}
    if getattr(args, "config", None):
        for key, value in read_flat_config(args.config).items():
            settings[key.strip().lstrip("-").replace("-", "_")] = value
    for name in SETTING_NAMES:
        value = getattr(args, name, None)
        if value is not None:
            settings[name] = value
    return settings


def resolve_images(spec: str) -> List[Path]:
    """Comma separated files and directories; directories contribute their PNG/PGM files."""
    paths: List[Path] = []
    for item in filter(None, (part.strip() for part in spec.split(","))):
        path = Path(item)
        if path.is_dir():
            paths.extend(sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES))
        else:
            paths.append(path)
    return paths


def build_experiment_config(settings: Dict[str, str]) -> ExperimentConfig:
    cfg = ExperimentConfig(
        patch_size=config_manager.config.patch_size,
        cheb_degree=config_manager.config.cheb_degree,
        output_directory=config_manager.get_output_directory(),
        max_n=config_manager.get_dense_max_n(),
        workers=config_manager.config.workers,
        probe_count=config_manager.config.probe_count,
    )
    updates = {}
    if "images" in settings:
        updates["images"] = resolve_images(settings["images"])
    if "snr" in settings:
        updates["snr_levels"] = _floats(settings["snr"])
    if "seed" in settings:
        updates["seeds"] = _ints(settings["seed"])
    if "patch" in settings:
        updates["patch_size"] = int(settings["patch"])
    if "h" in settings:
        updates["kernel_widths"] = _floats(settings["h"])
    if "rank" in settings:
        updates["ranks"] = _ints(settings["rank"])
    if "omega" in settings:
        updates["omegas"] = _floats(settings["omega"])
    if "order" in settings:
        updates["orders"] = _ints(settings["order"])
    if "cheb_n" in settings:
        degrees = _ints(settings["cheb_n"])
        updates["cheb_degrees"] = degrees
        updates["cheb_degree"] = degrees[0]
    if "max_n" in settings:
        updates["max_n"] = int(settings["max_n"])
    if "out" in settings:
        updates["output_directory"] = Path(settings["out"])
    if "workers" in settings:
        updates["workers"] = int(settings["workers"])
    if "size" in settings:
        updates["image_size"] = int(settings["size"])
    if "operators" in settings:
        updates["operator_count"] = int(settings["operators"])
    if "operator_size" in settings:
        updates["operator_size"] = int(settings["operator_size"])
    if "probes" in settings:
        updates["probe_count"] = int(settings["probes"])
    return replace(cfg, **updates)


def _report(output: ExperimentOutput) -> None:
    for path in output.paths:
        print(f"Wrote {path}")
    if "error" in output.table.columns:
        failures = int((output.table["error"] != "").sum())
        if failures:
            print(f"{failures} row(s) failed; see the error column")


def command_denoise(args: argparse.Namespace, settings: Dict[str, str]) -> int:
    result = run_denoise(
        args.image,
        pipeline=settings.get("pipeline", "nlm"),
        out_dir=settings.get("out", str(config_manager.get_output_directory())),
        p=int(settings.get("patch", config_manager.config.patch_size)),
        h=float(settings.get("h", 1.0)),
        rank=int(settings["rank"]) if "rank" in settings else None,
        omega=float(settings.get("omega", 0.3)),
        order=int(settings.get("order", 4)),
        N=int(settings.get("cheb_n", config_manager.config.cheb_degree)),
        snr=float(settings["snr"]) if "snr" in settings else None,
        seed=int(settings.get("seed", 0)),
        clean_path=settings.get("clean"),
        sb2=load_sb2_config(settings["sb2_config"]) if "sb2_config" in settings else None,
        max_n=int(settings["max_n"]) if "max_n" in settings else None,
    )
    print(f"Wrote {result.output_path}")
    if result.psnr_denoised is not None:
        print(f"PSNR noisy={result.psnr_noisy:.4f} dB {result.pipeline}={result.psnr_denoised:.4f} dB")
    return 0


def command_sweep_kernel(args: argparse.Namespace, settings: Dict[str, str]) -> int:
    _report(run_kernel_sweep(build_experiment_config(settings)))
    return 0


def command_sweep_cutoff(args: argparse.Namespace, settings: Dict[str, str]) -> int:
    cfg = build_experiment_config(settings)
    # Explicit h / order replace the per-SNR defaults
    cfg.kernel_width = cfg.kernel_widths[0] if "h" in settings else None
    cfg.order = cfg.orders[0] if "order" in settings else None
    _report(run_cutoff_sweep(cfg))
    return 0


def command_cheb_error(args: argparse.Namespace, settings: Dict[str, str]) -> int:
    cfg = build_experiment_config(settings)
    if "omega" in settings:
        cfg.error_omega = cfg.omegas[0]
    if "h" in settings:
        cfg.operator_h = cfg.kernel_widths[0]
    _report(run_cheb_error_experiment(cfg))
    return 0


def command_compare(args: argparse.Namespace, settings: Dict[str, str]) -> int:
    _report(run_comparison(build_experiment_config(settings)))
    return 0


def command_gen_images(args: argparse.Namespace, settings: Dict[str, str]) -> int:
    paths = generate_test_images(
        settings.get("out", "test_images"),
        size=int(settings.get("size", 60)),
        seed=_ints(settings.get("seed", "0"))[0],
    )
    for path in paths:
        print(f"Wrote {path}")
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace, Dict[str, str]], int]] = {
    "denoise": command_denoise,
    "sweep-kernel": command_sweep_kernel,
    "sweep-cutoff": command_sweep_cutoff,
    "cheb-error": command_cheb_error,
    "compare": command_compare,
    "gen-images": command_gen_images,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_arguments(argv)
    level = (args.log_level or config_manager.config.log_level).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=LOG_FORMAT)

    try:
        settings = merge_settings(args)
        return COMMANDS[args.command](args, settings)
    except (DenoiseError, ValueError, FileNotFoundError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return 2
