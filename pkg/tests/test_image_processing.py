import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from models.domain_models import Image, NoiseModel
from models.exceptions import (
    DegenerateImageError, DimensionMismatchError, InvalidParameterError
)
from services.image_processing import (
    add_gaussian_noise, clip_to_range, extract_patch_vector, normalized, patch_matrix,
    psnr, resize_bicubic, sigma_for_snr
)


@st.composite
def image_pair(draw):
    height = draw(st.integers(min_value=1, max_value=6))
    width = draw(st.integers(min_value=1, max_value=6))
    values = st.floats(min_value=0.0, max_value=255.0, allow_nan=False)
    first = draw(st.lists(values, min_size=height * width, max_size=height * width))
    second = draw(st.lists(values, min_size=height * width, max_size=height * width))
    return (Image(np.reshape(first, (height, width))), Image(np.reshape(second, (height, width))))


class TestImage:
    def test_rejects_non_finite(self):
        with pytest.raises(InvalidParameterError):
            Image(np.array([[1.0, np.nan]]))

    def test_rejects_unknown_range(self):
        with pytest.raises(InvalidParameterError):
            Image(np.zeros((2, 2)), 100.0)

    def test_pixels_are_read_only(self):
        img = Image(np.zeros((2, 3)))
        with pytest.raises(ValueError):
            img.pixels[0, 0] = 1.0

    def test_column_is_row_major(self):
        img = Image(np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert img.column().tolist() == [1.0, 2.0, 3.0, 4.0]
        assert np.array_equal(img.with_column(img.column()).pixels, img.pixels)


class TestNoise:
    def test_zero_sigma_is_identity(self, textured_image):
        out = add_gaussian_noise(textured_image, NoiseModel(0.0, seed=9))
        assert np.array_equal(out.pixels, textured_image.pixels)

    def test_same_seed_same_noise(self, textured_image):
        first = add_gaussian_noise(textured_image, NoiseModel(20.0, seed=4))
        second = add_gaussian_noise(textured_image, NoiseModel(20.0, seed=4))
        assert np.array_equal(first.pixels, second.pixels)

    def test_noise_is_not_clipped(self):
        img = Image(np.full((20, 20), 255.0))
        out = add_gaussian_noise(img, NoiseModel(30.0, seed=1))
        assert out.pixels.max() > 255.0

    def test_sample_standard_deviation(self):
        img = Image(np.full((1000, 1000), 100.0))
        out = add_gaussian_noise(img, NoiseModel(10.0, seed=2))
        residual = out.pixels - img.pixels
        assert abs(residual.std() - 10.0) < 0.05
        # Adjacent samples are uncorrelated
        flat = residual.reshape(-1)
        assert abs(np.corrcoef(flat[:-1], flat[1:])[0, 1]) < 0.01

    @pytest.mark.parametrize("sigma", [-1.0, math.inf, math.nan])
    def test_invalid_sigma(self, sigma):
        with pytest.raises(InvalidParameterError):
            NoiseModel(sigma)


class TestSigmaForSnr:
    def test_checkerboard(self):
        rows, cols = np.indices((8, 8))
        img = Image(np.where((rows + cols) % 2 == 0, 0.0, 255.0))
        assert sigma_for_snr(img, 1.0) == pytest.approx(127.5)
        assert sigma_for_snr(img, 0.5) == pytest.approx(255.0)

    def test_constant_image(self, constant_image):
        with pytest.raises(DegenerateImageError):
            sigma_for_snr(constant_image, 1.0)

    def test_single_pixel(self):
        with pytest.raises(InvalidParameterError):
            sigma_for_snr(Image(np.array([[3.0]])), 1.0)

    @pytest.mark.parametrize("snr", [0.0, -1.0])
    def test_non_positive_snr(self, textured_image, snr):
        with pytest.raises(InvalidParameterError):
            sigma_for_snr(textured_image, snr)


class TestPsnr:
    def test_unit_offset(self, textured_image):
        shifted = Image(textured_image.pixels + 1.0)
        assert psnr(textured_image, shifted) == pytest.approx(20 * math.log10(255), abs=1e-4)

    def test_full_scale_offset(self, textured_image):
        shifted = Image(textured_image.pixels + 255.0)
        assert psnr(textured_image, shifted) == pytest.approx(0.0, abs=1e-12)

    def test_summed_mode_sums_errors(self):
        a = Image(np.zeros((2, 2)))
        b = Image(np.ones((2, 2)))
        assert psnr(a, b, mode="paper-eq10") == pytest.approx(20 * math.log10(255 / 2), abs=1e-4)
        assert psnr(a, b, mode="unnormalized") == psnr(a, b, mode="paper-eq10")

    def test_unknown_mode(self):
        with pytest.raises(InvalidParameterError, match="Unknown PSNR mode"):
            psnr(Image(np.zeros((2, 2))), Image(np.ones((2, 2))), mode="peak")

    def test_identical_images_are_infinite(self, textured_image):
        assert psnr(textured_image, textured_image) == math.inf

    def test_unit_range_is_rescaled(self):
        a = Image(np.zeros((3, 3)), 1.0)
        b = Image(np.full((3, 3), 1.0 / 255.0), 1.0)
        assert psnr(a, b) == pytest.approx(20 * math.log10(255), abs=1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            psnr(Image(np.zeros((2, 2))), Image(np.zeros((2, 3))))

    def test_summed_mode_depends_on_pixel_count(self):
        small = psnr(Image(np.zeros((2, 2))), Image(np.ones((2, 2))), mode="paper-eq10")
        large = psnr(Image(np.zeros((4, 4))), Image(np.ones((4, 4))), mode="paper-eq10")
        assert small - large == pytest.approx(10 * math.log10(4))

    @given(image_pair())
    @settings(max_examples=50, deadline=None)
    def test_symmetric(self, pair):
        a, b = pair
        for mode in ("standard", "paper-eq10"):
            assert psnr(a, b, mode=mode) == psnr(b, a, mode=mode)


class TestPatches:
    def test_single_pixel_patch(self, textured_image):
        assert extract_patch_vector(textured_image, 5, 1).tolist() == [textured_image.column()[5]]

    def test_constant_patch(self, constant_image):
        assert np.all(extract_patch_vector(constant_image, 0, 5) == 117.0)
        assert extract_patch_vector(constant_image, 0, 5).size == 25

    def test_corner_mirror(self):
        img = Image(np.arange(1.0, 10.0).reshape(3, 3))
        # Symmetric padding repeats the edge row and column
        expected = [1, 1, 2,
                    1, 1, 2,
                    4, 4, 5]
        assert extract_patch_vector(img, 0, 3).tolist() == expected

    def test_interior_is_raw_window(self, textured_image):
        i = 5 * textured_image.width + 7
        window = textured_image.pixels[3:8, 5:10].reshape(-1)
        assert np.array_equal(extract_patch_vector(textured_image, i, 5), window)

    def test_patch_matrix_matches_vectors(self, textured_image):
        matrix = patch_matrix(textured_image, 3)
        for i in (0, 17, textured_image.n - 1):
            assert np.array_equal(matrix[i], extract_patch_vector(textured_image, i, 3))

    @pytest.mark.parametrize("p", [0, 2, 4])
    def test_even_patch_side(self, textured_image, p):
        with pytest.raises(InvalidParameterError):
            extract_patch_vector(textured_image, 0, p)


class TestResize:
    def test_same_size(self, textured_image):
        out = resize_bicubic(textured_image, textured_image.width, textured_image.height)
        assert np.allclose(out.pixels, textured_image.pixels, atol=1e-12)

    def test_constant_is_preserved(self, constant_image):
        out = resize_bicubic(constant_image, 11, 4)
        assert out.pixels.shape == (4, 11)
        assert np.allclose(out.pixels, 117.0, atol=1e-9)

    def test_ramp_downscale(self):
        rows, cols = np.indices((32, 32))
        img = Image(3.0 * cols + 2.0 * rows + 10.0)
        out = resize_bicubic(img, 16, 16)
        out_rows, out_cols = np.indices((16, 16))
        # Output pixel j sits at input coordinate 2j + 0.5
        expected = 3.0 * (2 * out_cols + 0.5) + 2.0 * (2 * out_rows + 0.5) + 10.0
        assert np.allclose(out.pixels[2:-2, 2:-2], expected[2:-2, 2:-2], atol=1e-9)

    def test_invalid_size(self, textured_image):
        with pytest.raises(InvalidParameterError):
            resize_bicubic(textured_image, 0, 3)


def test_normalized_and_clip():
    img = Image(np.array([[-10.0, 51.0, 300.0]]))
    assert np.allclose(normalized(img).pixels, img.pixels / 255.0)
    assert normalized(img).value_range == 1.0
    assert clip_to_range(img).pixels.tolist() == [[0.0, 51.0, 255.0]]
