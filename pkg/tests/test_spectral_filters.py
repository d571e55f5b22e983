import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from models.domain_models import FilterKind, FilterSpec
from models.exceptions import DomainError, InvalidParameterError, SingularCutoffError
from services.spectral_filters import (
    compose_filters, eval_butterworth, eval_hard_threshold, eval_slanted_butterworth,
    format_filter_spec, identity_filter, make_filter, parse_filter_spec, verify_filter_conditions
)

OMEGA_GRID = [round(0.1 * i, 1) for i in range(1, 10)]
ORDER_GRID = [1, 2, 4, 8, 15, 16, 50]

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
cutoff = st.floats(min_value=0.0, max_value=0.99, allow_nan=False)
order = st.integers(min_value=1, max_value=50)


class TestHardThreshold:
    @pytest.mark.parametrize("x,omega,expected", [
        (0.3, 0.5, 0.0),
        (0.7, 0.5, 0.7),
        (1.0, 1.0, 1.0),
        (0.5, 0.5, 0.5),
    ])
    def test_values(self, x, omega, expected):
        assert eval_hard_threshold(x, omega) == expected

    @pytest.mark.parametrize("x", [-0.01, 1.01, math.nan])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            eval_hard_threshold(x, 0.5)


class TestButterworth:
    def test_one_maps_to_one(self):
        assert eval_butterworth(1.0, 0.5, 4) == 1.0

    def test_zero(self):
        assert eval_butterworth(0.0, 0.5, 1) == pytest.approx(1 / math.sqrt(5), abs=1e-14)

    @pytest.mark.parametrize("omega", OMEGA_GRID)
    @pytest.mark.parametrize("d", ORDER_GRID)
    def test_cutoff_value(self, omega, d):
        assert eval_butterworth(omega, omega, d) == pytest.approx(1 / math.sqrt(2), abs=1e-14)

    def test_singular_cutoff(self):
        with pytest.raises(SingularCutoffError):
            eval_butterworth(0.5, 1.0, 4)

    def test_singular_cutoff_is_invalid_parameter(self):
        with pytest.raises(InvalidParameterError):
            eval_slanted_butterworth(0.5, 1.0, 4)


class TestSlantedButterworth:
    def test_hand_value(self):
        assert eval_slanted_butterworth(0.5, 0.7, 1) == pytest.approx(1.5 / math.sqrt(34), abs=1e-14)

    def test_one_maps_to_one(self):
        assert eval_slanted_butterworth(1.0, 0.7, 4) == 1.0

    @pytest.mark.parametrize("omega", OMEGA_GRID)
    @pytest.mark.parametrize("d", ORDER_GRID)
    def test_cutoff_value(self, omega, d):
        assert eval_slanted_butterworth(omega, omega, d) == pytest.approx(omega / math.sqrt(2), abs=1e-14)
        assert eval_slanted_butterworth(1.0, omega, d) == pytest.approx(1.0, abs=1e-14)

    def test_no_overflow_for_high_order(self):
        with np.errstate(over="raise"):
            value = eval_slanted_butterworth(0.01, 0.3, 50)
        assert 0.0 <= value < 1e-8

    def test_log_space_branch_matches_direct_formula(self):
        # ratio 25 at x = 0 puts 2d log(ratio) above the log-space switch for d = 50
        x = np.array([0.0, 0.001, 0.01, 0.2])
        ratio = (1 - x) / (1 - 0.96)
        direct = x * (1 + ratio ** 100) ** -0.5
        assert np.allclose(eval_slanted_butterworth(x, 0.96, 50), direct, rtol=1e-12, atol=0)

    def test_vectorised(self):
        x = np.linspace(0, 1, 11)
        values = eval_slanted_butterworth(x, 0.4, 3)
        assert values.shape == (11,)
        assert values[0] == 0.0

    @given(unit, cutoff, order)
    @settings(max_examples=200, deadline=None)
    def test_range(self, x, omega, d):
        value = eval_slanted_butterworth(x, omega, d)
        assert 0.0 <= value <= x <= 1.0

    @pytest.mark.parametrize("omega", OMEGA_GRID)
    @pytest.mark.parametrize("d", [1, 4, 16, 50])
    def test_monotone(self, omega, d):
        values = eval_slanted_butterworth(np.linspace(0, 1, 10_000), omega, d)
        assert np.all(np.diff(values) >= -1e-15)

    @pytest.mark.parametrize("x,omega", [(0.8, 0.5), (0.3, 0.5), (0.95, 0.9), (0.1, 0.3)])
    def test_approaches_hard_threshold(self, x, omega):
        target = eval_hard_threshold(x, omega)
        gaps = [abs(eval_slanted_butterworth(x, omega, d) - target) for d in (1, 2, 4, 8, 16, 50)]
        assert all(later <= earlier for earlier, later in zip(gaps, gaps[1:]))


class TestVerify:
    def test_slanted_butterworth_passes(self):
        spec = FilterSpec(FilterKind.SLANTED_BUTTERWORTH, 0.7, 4)
        report = verify_filter_conditions(spec, grid_size=10_000, tol=1e-12)
        assert report.passed

    def test_hard_threshold_passes(self):
        assert verify_filter_conditions(FilterSpec(FilterKind.HARD_THRESHOLD, 0.5)).passed

    def test_doubling_fails_at_one(self):
        report = verify_filter_conditions(lambda x: 2 * x, grid_size=10_000, tol=1e-12)
        assert not report.passed
        assert report.violation_x == 1.0
        assert report.violation_value == 2.0

    def test_reports_first_range_violation(self):
        report = verify_filter_conditions(lambda x: np.where(x < 0.5, -0.25, x), grid_size=11)
        assert not report.passed
        assert report.violation_x == 0.0
        assert report.violation_value == -0.25

    def test_butterworth_gain_passes(self):
        assert verify_filter_conditions(FilterSpec(FilterKind.BUTTERWORTH, 0.5, 4)).passed

    def test_grid_size(self):
        with pytest.raises(InvalidParameterError):
            verify_filter_conditions(identity_filter(), grid_size=1)

    @pytest.mark.parametrize("outer,inner", [
        ("sb:omega=0.3,d=4", "sb:omega=0.7,d=16"),
        ("hard:omega=0.5", "bw:omega=0.2,d=2"),
        ("bw:omega=0.6,d=8", "sb:omega=0.5,d=50"),
    ])
    def test_composition_closure(self, outer, inner):
        f, g = parse_filter_spec(outer), parse_filter_spec(inner)
        assert verify_filter_conditions(f).passed and verify_filter_conditions(g).passed
        assert verify_filter_conditions(compose_filters(f, g)).passed


class TestFilterSpecText:
    @pytest.mark.parametrize("text,expected", [
        ("sb:omega=0.7,d=4", FilterSpec(FilterKind.SLANTED_BUTTERWORTH, 0.7, 4)),
        ("bw:omega=0.5,d=8", FilterSpec(FilterKind.BUTTERWORTH, 0.5, 8)),
        ("hard:omega=0.5", FilterSpec(FilterKind.HARD_THRESHOLD, 0.5)),
        (" SB : omega = 0.3 , d = 50 ", FilterSpec(FilterKind.SLANTED_BUTTERWORTH, 0.3, 50)),
    ])
    def test_parse(self, text, expected):
        assert parse_filter_spec(text) == expected

    @pytest.mark.parametrize("text", [
        "meyer:omega=0.5",
        "sb:omega=0.5",
        "sb:d=4",
        "sb:omega=1.5,d=4",
        "sb:omega=0.5,d=0",
        "sb:omega=abc,d=4",
        "hard:omega=0.5,q=2",
        "hard:omega",
    ])
    def test_parse_rejects(self, text):
        with pytest.raises(InvalidParameterError):
            parse_filter_spec(text)

    def test_format(self):
        assert format_filter_spec(parse_filter_spec("sb:omega=0.7,d=4")) == "sb:omega=0.7,d=4"
        assert format_filter_spec(FilterSpec(FilterKind.HARD_THRESHOLD, 0.25)) == "hard:omega=0.25"

    def test_make_filter_rejects_unit_cutoff(self):
        with pytest.raises(SingularCutoffError):
            make_filter(FilterSpec(FilterKind.SLANTED_BUTTERWORTH, 1.0, 4))
        assert make_filter(FilterSpec(FilterKind.HARD_THRESHOLD, 1.0))(np.array([1.0]))[0] == 1.0
