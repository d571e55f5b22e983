import os
import pytest
from hypothesis import given, strategies as st
from pathlib import Path
from config.configuration_manager import ConfigurationManager, DenoiseConfig, read_flat_config


def test_default_configuration():
    """Test that default configuration is valid"""
    config_manager = ConfigurationManager(config_file="non_existent.ini")
    config = config_manager.config

    assert isinstance(config, DenoiseConfig)
    assert config.dense_max_n == 8192
    assert config.oracle_max_n == 4096
    assert config.cheb_degree == 150
    assert config.probe_count == 16
    assert config.eig_solver == "auto"
    assert config.distance_normalization == "patch"
    assert config.patch_size % 2 == 1
    assert config.allowed_file_types == ["png", "pgm"]


@given(st.integers(min_value=1, max_value=100_000),
       st.integers(min_value=1, max_value=1000),
       st.integers(min_value=1, max_value=64))
def test_valid_capacities(dense_max_n, cheb_degree, probes):
    """Test configuration validation with valid values"""
    os.environ["NLM_DENSE_MAX_N"] = str(dense_max_n)
    os.environ["NLM_CHEB_DEGREE"] = str(cheb_degree)
    os.environ["NLM_PROBE_COUNT"] = str(probes)

    try:
        config = ConfigurationManager(config_file="non_existent.ini").config
        assert config.dense_max_n == dense_max_n
        assert config.cheb_degree == cheb_degree
        assert config.probe_count == probes
    finally:
        del os.environ["NLM_DENSE_MAX_N"]
        del os.environ["NLM_CHEB_DEGREE"]
        del os.environ["NLM_PROBE_COUNT"]


@given(st.integers(max_value=0))
def test_invalid_dense_cap(cap):
    """Test that non-positive capacities raise ValueError"""
    os.environ["NLM_DENSE_MAX_N"] = str(cap)

    try:
        with pytest.raises(ValueError):
            ConfigurationManager(config_file="non_existent.ini")
    finally:
        del os.environ["NLM_DENSE_MAX_N"]


@given(st.integers(min_value=-20, max_value=40).filter(lambda p: p <= 0 or p % 2 == 0))
def test_invalid_patch_size(patch):
    """Test that even or non-positive patch sizes raise ValueError"""
    os.environ["NLM_PATCH_SIZE"] = str(patch)

    try:
        with pytest.raises(ValueError):
            ConfigurationManager(config_file="non_existent.ini")
    finally:
        del os.environ["NLM_PATCH_SIZE"]


@pytest.mark.parametrize("variable,value", [
    ("NLM_EIG_SOLVER", "lanczos"),
    ("NLM_DISTANCE_NORMALIZATION", "euclid"),
    ("NLM_LOG_LEVEL", "chatty"),
    ("NLM_WORKERS", "0"),
])
def test_invalid_choices(variable, value):
    os.environ[variable] = value
    try:
        with pytest.raises(ValueError, match="Configuration errors"):
            ConfigurationManager(config_file="non_existent.ini")
    finally:
        del os.environ[variable]


def test_environment_precedence(tmp_path):
    """Test that environment variables take precedence over config file"""
    config_file = tmp_path / "test_config.ini"
    config_file.write_text("""
[chebyshev]
degree = 80

[oracle]
solver = lapack
""")

    os.environ["NLM_CHEB_DEGREE"] = "200"
    try:
        config_manager = ConfigurationManager(config_file=str(config_file))
        # Environment wins for the degree, the file supplies the solver
        assert config_manager.config.cheb_degree == 200
        assert config_manager.config.eig_solver == "lapack"
    finally:
        del os.environ["NLM_CHEB_DEGREE"]


def test_ensure_output_directory(tmp_path):
    config_manager = ConfigurationManager(config_file="non_existent.ini")
    target = config_manager.ensure_output_directory(tmp_path / "a" / "b")
    assert target.is_dir()


def test_accessors_follow_configuration(tmp_path):
    os.environ["NLM_DENSE_MAX_N"] = "900"
    os.environ["NLM_ORACLE_MAX_N"] = "400"
    os.environ["NLM_OUTPUT_DIRECTORY"] = str(tmp_path / "runs")
    try:
        config_manager = ConfigurationManager(config_file="non_existent.ini")
        assert config_manager.get_dense_max_n() == 900
        assert config_manager.get_oracle_max_n() == 400
        assert config_manager.get_output_directory() == tmp_path / "runs"
        assert config_manager.config.jacobi_auto_n == 64
    finally:
        del os.environ["NLM_DENSE_MAX_N"]
        del os.environ["NLM_ORACLE_MAX_N"]
        del os.environ["NLM_OUTPUT_DIRECTORY"]


def test_read_flat_config(tmp_path):
    settings = tmp_path / "run.cfg"
    settings.write_text("# experiment\npatch = 5\ncheb-n=150\nsnr = 0.5,0.75\n")

    values = read_flat_config(settings)

    assert values == {"patch": "5", "cheb-n": "150", "snr": "0.5,0.75"}


def test_read_flat_config_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_flat_config(Path(tmp_path) / "missing.cfg")
