import math

import numpy as np
import pytest

from models.domain_models import Image
from models.exceptions import CapacityError, DimensionMismatchError, InvalidParameterError
from services.file_handler import load_operator, save_operator
from services.nlm_operator import (
    apply_operator, build_nlm_operator, condition_numbers, operator_from_weights
)

E2 = math.exp(-2.0)


class TestBuild:
    def test_constant_image(self, constant_image):
        op = build_nlm_operator(constant_image, 3, 0.5)
        assert np.all(op.weights == 1.0)
        assert np.all(op.degrees == constant_image.n)
        assert np.allclose(op.dense(), 1.0 / constant_image.n)

    def test_single_pixel(self):
        op = build_nlm_operator(Image(np.array([[42.0]])), 3, 1.0)
        assert op.dense().tolist() == [[1.0]]

    def test_two_pixel_example(self, two_pixel_image):
        op = build_nlm_operator(two_pixel_image, 1, 0.5)
        assert op.weights[0, 1] == pytest.approx(E2, rel=1e-14)
        assert op.dense()[0] == pytest.approx([1 / (1 + E2), E2 / (1 + E2)], rel=1e-14)

    def test_unscaled_normalization_drops_patch_divisor(self, noise_image):
        patch = build_nlm_operator(noise_image, 3, 1.5, distance_normalization="patch")
        unscaled = build_nlm_operator(noise_image, 3, 0.5, distance_normalization="unscaled")
        # 2 h^2 p^2 with h=1.5, p=3 equals 2 h^2 with h=4.5; compare with the unscaled mode at 4.5
        unscaled_wide = build_nlm_operator(noise_image, 3, 4.5, distance_normalization="unscaled")
        assert np.allclose(patch.weights, unscaled_wide.weights, rtol=1e-12)
        assert not np.allclose(patch.weights, unscaled.weights)

    def test_invariants(self, noise_image):
        op = build_nlm_operator(noise_image, 5, 0.7)
        assert np.array_equal(op.weights, op.weights.T)
        assert np.all(np.diag(op.weights) == 1.0)
        assert np.all((op.weights > 0) & (op.weights <= 1))
        assert np.all((op.degrees >= 1) & (op.degrees <= op.n))
        assert np.allclose(op.dense().sum(axis=1), 1.0, atol=1e-10)

    def test_weights_are_immutable(self, noise_image):
        op = build_nlm_operator(noise_image, 3, 0.7)
        with pytest.raises(ValueError):
            op.weights[0, 0] = 0.5

    def test_threads_give_identical_weights(self):
        rng = np.random.default_rng(5)
        img = Image(rng.uniform(0, 255, size=(30, 30)))
        serial = build_nlm_operator(img, 3, 0.7, workers=1)
        threaded = build_nlm_operator(img, 3, 0.7, workers=4)
        assert np.array_equal(serial.weights, threaded.weights)

    def test_capacity_error_names_cap(self, noise_image):
        with pytest.raises(CapacityError, match="100"):
            build_nlm_operator(noise_image, 3, 0.7, max_n=100)

    def test_capacity_defaults_to_configuration(self, mocker, noise_image):
        mocker.patch("services.nlm_operator.config_manager.get_dense_max_n", return_value=50)
        with pytest.raises(CapacityError) as raised:
            build_nlm_operator(noise_image, 3, 0.7)
        assert (raised.value.n, raised.value.cap) == (144, 50)

    @pytest.mark.parametrize("h", [0.0, -1.0, math.inf])
    def test_invalid_width(self, noise_image, h):
        with pytest.raises(InvalidParameterError):
            build_nlm_operator(noise_image, 3, h)

    def test_even_patch(self, noise_image):
        with pytest.raises(InvalidParameterError):
            build_nlm_operator(noise_image, 4, 0.7)

    def test_unknown_normalization(self, noise_image):
        with pytest.raises(InvalidParameterError):
            build_nlm_operator(noise_image, 3, 0.7, distance_normalization="l1")


class TestApply:
    def test_ones_are_fixed(self, noise_image):
        op = build_nlm_operator(noise_image, 3, 0.7)
        assert np.allclose(apply_operator(op, np.ones(op.n)), 1.0, atol=1e-10)

    def test_constant_operator_averages(self, constant_image):
        op = build_nlm_operator(constant_image, 3, 0.7)
        y = np.arange(op.n, dtype=float)
        assert np.allclose(apply_operator(op, y), y.mean())

    def test_two_pixel_matvec(self, two_pixel_image):
        op = build_nlm_operator(two_pixel_image, 1, 0.5)
        result = apply_operator(op, np.array([1.0, 0.0]))
        assert result == pytest.approx([1 / (1 + E2), E2 / (1 + E2)], rel=1e-14)

    def test_block_matches_columns(self, noise_image):
        op = build_nlm_operator(noise_image, 3, 0.7)
        block = np.random.default_rng(0).standard_normal((op.n, 3))
        together = op.apply(block)
        for j in range(3):
            assert np.allclose(together[:, j], op.apply(block[:, j]), atol=1e-14)

    def test_linear_operator(self, noise_image):
        op = build_nlm_operator(noise_image, 3, 0.7)
        y = np.linspace(0, 1, op.n)
        assert np.allclose(op.as_linear_operator().matvec(y), apply_operator(op, y))

    def test_length_mismatch(self, noise_image):
        op = build_nlm_operator(noise_image, 3, 0.7)
        with pytest.raises(DimensionMismatchError):
            apply_operator(op, np.ones(op.n + 1))


class TestConditionNumbers:
    def test_identity_degrees(self):
        op = operator_from_weights(np.eye(3), 1, 1.0)
        assert condition_numbers(op) == (1.0, 1.0)

    def test_hand_computed(self, mocker):
        op = mocker.Mock(degrees=np.array([1.0, 4.0]))
        kappa, kappa_f = condition_numbers(op)
        assert kappa == pytest.approx(2.0)
        assert kappa_f == pytest.approx(2.0)

    def test_condition_number_bounds(self, noise_image, textured_image):
        for img in (noise_image, textured_image):
            op = build_nlm_operator(img, 3, 0.3)
            kappa, kappa_f = condition_numbers(op)
            assert 1.0 <= kappa <= math.sqrt(op.n)
            assert 1.0 <= kappa_f <= op.n


class TestWeightsValidation:
    def test_asymmetric(self):
        with pytest.raises(InvalidParameterError):
            operator_from_weights(np.array([[1.0, 0.5], [0.4, 1.0]]), 1, 1.0)

    def test_out_of_range(self):
        with pytest.raises(InvalidParameterError):
            operator_from_weights(np.array([[1.0, 1.5], [1.5, 1.0]]), 1, 1.0)


def test_operator_cache_round_trip(tmp_path, noise_image):
    op = build_nlm_operator(noise_image, 3, 0.7)
    path = save_operator(op, tmp_path / "op.bin")

    loaded = load_operator(path)

    assert np.array_equal(loaded.weights, op.weights)
    assert np.array_equal(loaded.degrees, op.degrees)
    assert (loaded.patch_size, loaded.h) == (3, 0.7)


def test_operator_cache_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"not an operator file at all, definitely not")
    with pytest.raises(InvalidParameterError):
        load_operator(path)
