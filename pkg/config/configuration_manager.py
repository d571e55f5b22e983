"""
Configuration Manager for the spectral NLM denoising toolkit

Handles loading configuration from environment variables, configuration files,
and provides default values with proper validation.
"""

import os
import logging
from pathlib import Path
from typing import List, Optional, Dict, Any, Union
from dataclasses import dataclass
from dotenv import load_dotenv
import configparser

logger = logging.getLogger(__name__)

EIG_SOLVERS = ("auto", "jacobi", "lapack")
DISTANCE_NORMALIZATIONS = ("patch", "unscaled")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

# Section used when a flat key=value file is read through configparser
_FLAT_SECTION = "run"


@dataclass
class DenoiseConfig:
    """System configuration data class"""
    dense_max_n: int
    oracle_max_n: int
    jacobi_max_n: int
    eig_solver: str
    jacobi_auto_n: int
    distance_normalization: str
    patch_size: int
    cheb_degree: int
    probe_count: int
    output_directory: Path
    allowed_file_types: List[str]
    max_file_size: int
    workers: int
    log_level: str


class ConfigurationManager:
    """Manages toolkit configuration from multiple sources"""

    def __init__(self, config_file: Optional[str] = None):
        """
        Initialize configuration manager

        Args:
            config_file: Optional path to configuration file
        """
        self._config = None
        self._config_file = config_file or "config.ini"
        self._load_configuration()

    def _load_configuration(self) -> None:
        """Load configuration from environment variables and config files"""
        env_file = Path(".env")
        if env_file.exists():
            load_dotenv(env_file)
            logger.info("Loaded environment variables from .env file")

        config_parser = configparser.ConfigParser()
        config_file_path = Path(self._config_file)

        if config_file_path.exists():
            config_parser.read(config_file_path)
            logger.info(f"Loaded configuration from {config_file_path}")
        else:
            logger.debug(f"Configuration file {config_file_path} not found, using defaults")

        # Build configuration with precedence: env vars > config file > defaults
        self._config = DenoiseConfig(
            dense_max_n=int(self._get_config_value(
                "NLM_DENSE_MAX_N", config_parser, "operator", "dense_max_n", "8192"
            )),
            oracle_max_n=int(self._get_config_value(
                "NLM_ORACLE_MAX_N", config_parser, "oracle", "max_n", "4096"
            )),
            jacobi_max_n=int(self._get_config_value(
                "NLM_JACOBI_MAX_N", config_parser, "oracle", "jacobi_max_n", "2000"
            )),
            eig_solver=self._get_config_value(
                "NLM_EIG_SOLVER", config_parser, "oracle", "solver", "auto"
            ).lower(),
            jacobi_auto_n=int(self._get_config_value(
                "NLM_JACOBI_AUTO_N", config_parser, "oracle", "jacobi_auto_n", "64"
            )),
            distance_normalization=self._get_config_value(
                "NLM_DISTANCE_NORMALIZATION", config_parser, "operator",
                "distance_normalization", "patch"
            ).lower(),
            patch_size=int(self._get_config_value(
                "NLM_PATCH_SIZE", config_parser, "operator", "patch_size", "5"
            )),
            cheb_degree=int(self._get_config_value(
                "NLM_CHEB_DEGREE", config_parser, "chebyshev", "degree", "150"
            )),
            probe_count=int(self._get_config_value(
                "NLM_PROBE_COUNT", config_parser, "chebyshev", "probe_count", "16"
            )),
            output_directory=Path(self._get_config_value(
                "NLM_OUTPUT_DIRECTORY", config_parser, "paths", "output_directory", "results"
            )),
            allowed_file_types=self._get_list_config_value(
                "NLM_ALLOWED_FILE_TYPES", config_parser, "io", "allowed_file_types",
                ["png", "pgm"]
            ),
            max_file_size=int(self._get_config_value(
                "NLM_MAX_FILE_SIZE", config_parser, "io", "max_file_size",
                "10485760"  # 10MB
            )),
            workers=int(self._get_config_value(
                "NLM_WORKERS", config_parser, "run", "workers", "1"
            )),
            log_level=self._get_config_value(
                "NLM_LOG_LEVEL", config_parser, "run", "log_level", "INFO"
            ).upper(),
        )

        self._validate_configuration()

    def _get_config_value(self, env_var: str, config_parser: configparser.ConfigParser,
                          section: str, key: str, default: str) -> str:
        """Get configuration value with precedence: env var > config file > default"""
        value = os.getenv(env_var)
        if value is not None:
            return value

        try:
            if config_parser.has_section(section) and config_parser.has_option(section, key):
                return config_parser.get(section, key)
        except (configparser.NoSectionError, configparser.NoOptionError):
            pass

        return default

    def _get_list_config_value(self, env_var: str, config_parser: configparser.ConfigParser,
                               section: str, key: str, default: List[str]) -> List[str]:
        """Get list configuration value"""
        value = self._get_config_value(env_var, config_parser, section, key, "")
        if value:
            return [item.strip().lower() for item in value.split(",") if item.strip()]
        return default

    def _validate_configuration(self) -> None:
        """Validate configuration values"""
        errors = []
        warnings = []
        cfg = self._config

        for name in ("dense_max_n", "oracle_max_n", "jacobi_max_n", "jacobi_auto_n",
                     "cheb_degree", "probe_count", "max_file_size", "workers"):
            if getattr(cfg, name) <= 0:
                errors.append(f"{name} must be positive")

        if cfg.patch_size <= 0 or cfg.patch_size % 2 == 0:
            errors.append("patch_size must be a positive odd integer")

        if cfg.eig_solver not in EIG_SOLVERS:
            errors.append(f"eig_solver must be one of {', '.join(EIG_SOLVERS)}")

        if cfg.distance_normalization not in DISTANCE_NORMALIZATIONS:
            errors.append(
                f"distance_normalization must be one of {', '.join(DISTANCE_NORMALIZATIONS)}"
            )

        if cfg.log_level not in LOG_LEVELS:
            errors.append(f"log_level must be one of {', '.join(LOG_LEVELS)}")

        if not cfg.allowed_file_types:
            warnings.append("No allowed file types specified")

        if cfg.dense_max_n > 8192:
            gigabytes = cfg.dense_max_n ** 2 * 8 / 1024 ** 3
            warnings.append(
                f"dense_max_n={cfg.dense_max_n} allows operators of up to {gigabytes:.1f} GB"
            )

        if cfg.jacobi_auto_n > cfg.jacobi_max_n:
            warnings.append("jacobi_auto_n exceeds jacobi_max_n; auto solver capped at jacobi_max_n")

        for warning in warnings:
            logger.warning(f"Configuration warning: {warning}")

        if errors:
            error_msg = "Configuration errors: " + "; ".join(errors)
            logger.error(error_msg)
            raise ValueError(error_msg)

    @property
    def config(self) -> DenoiseConfig:
        """Get the current configuration"""
        return self._config

    def get_dense_max_n(self) -> int:
        """Get the dense operator capacity"""
        return self._config.dense_max_n

    def get_oracle_max_n(self) -> int:
        """Get the eigendecomposition capacity"""
        return self._config.oracle_max_n

    def get_output_directory(self) -> Path:
        """Get output directory path"""
        return self._config.output_directory

    def ensure_output_directory(self, directory: Optional[Path] = None) -> Path:
        """Create the output directory if it doesn't exist"""
        target = Path(directory) if directory is not None else self._config.output_directory
        try:
            target.mkdir(parents=True, exist_ok=True)
            logger.info(f"Ensured directory exists: {target}")
        except Exception as e:
            logger.error(f"Failed to create directory {target}: {e}")
            raise
        return target


def read_flat_config(path: Union[str, Path]) -> Dict[str, str]:
    """
    Read a flat key=value file (no sections) into a dictionary.

    Blank lines and lines starting with '#' or ';' are ignored. Keys keep
    their spelling, so both `cheb-n` and `cheb_n` styles survive.
    """
    file_path = Path(path)
    if not file_path.exists():
        raise FileNotFoundError(f"Config file not found: {file_path}")

    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_string(f"[{_FLAT_SECTION}]\n" + file_path.read_text(encoding="utf-8"))
    values = dict(parser.items(_FLAT_SECTION))
    logger.info(f"Loaded {len(values)} settings from {file_path}")
    return values


# Global configuration manager instance
config_manager = ConfigurationManager()
