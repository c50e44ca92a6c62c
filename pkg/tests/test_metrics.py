import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from evfuse.errors import DimensionError
from evfuse.metrics import C1, C2, error_map, psnr, quality_report, ssim, video_psnr, video_ssim

WINDOWS = ["gaussian", "block"]
images = arrays(np.float64, (16, 16), elements=st.floats(0, 1, allow_nan=False))


class TestPsnr:
    def test_identical_is_inf(self, rng):
        a = rng.random((5, 5))
        assert psnr(a, a) == math.inf

    def test_zeros_vs_ones(self):
        assert psnr(np.zeros((4, 4)), np.ones((4, 4))) == 0.0

    def test_constant_difference(self, rng):
        a = rng.uniform(0, 0.9, (8, 8))
        assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            psnr(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_monotone_in_noise(self):
        rng = np.random.default_rng(7)
        a = rng.uniform(0.2, 0.8, (32, 32))
        u = rng.uniform(-1, 1, a.shape)
        values = [psnr(a, a + amp * u) for amp in (0.01, 0.05, 0.1)]
        assert values[0] > values[1] > values[2]

    @given(images, images)
    def test_symmetric_and_nonnegative(self, a, b):
        assert psnr(a, b) == psnr(b, a)
        assert psnr(a, b) >= 0


class TestSsim:
    @pytest.mark.parametrize("window", WINDOWS)
    def test_identity(self, window, rng):
        a = rng.random((24, 24))
        assert ssim(a, a, window) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("window", WINDOWS)
    def test_constant_patches(self, window):
        # mu_a = 0, mu_b = 1, no variance: (C1 * C2) / ((0 + 1 + C1) * C2)
        expected = (2 * 0 * 1 + C1) * (0 + C2) / ((0 ** 2 + 1 ** 2 + C1) * (0 + 0 + C2))
        assert ssim(np.zeros((16, 16)), np.ones((16, 16)), window) == pytest.approx(expected, rel=1e-9)
        assert expected == pytest.approx(C1 / (1 + C1))

    def test_block_single_window_by_hand(self, rng):
        a, b = rng.random((2, 8, 8))
        ma, mb = a.mean(), b.mean()
        va, vb = a.var(), b.var()
        cov = ((a - ma) * (b - mb)).mean()
        want = (2 * ma * mb + C1) * (2 * cov + C2) / ((ma ** 2 + mb ** 2 + C1) * (va + vb + C2))
        assert ssim(a, b, "block") == pytest.approx(want, rel=1e-12)

    def test_block_averages_blocks(self, rng):
        a, b = rng.random((2, 16, 8))
        assert ssim(a, b, "block") == pytest.approx((ssim(a[:8], b[:8], "block") + ssim(a[8:], b[8:], "block")) / 2)

    def test_gaussian_matches_skimage(self, rng):
        metrics = pytest.importorskip("skimage.metrics")
        a = rng.random((40, 33))
        b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
        ref = metrics.structural_similarity(a, b, gaussian_weights=True, sigma=1.5,
                                            use_sample_covariance=False, data_range=1.0)
        assert ssim(a, b) == pytest.approx(ref, abs=1e-9)

    @pytest.mark.parametrize("window", WINDOWS)
    def test_too_small(self, window):
        with pytest.raises(DimensionError):
            ssim(np.zeros((7, 20)), np.zeros((7, 20)), window)

    def test_unknown_window(self):
        with pytest.raises(ValueError):
            ssim(np.zeros((16, 16)), np.zeros((16, 16)), "box")

    @settings(max_examples=40)
    @given(images, images)
    def test_symmetric_and_bounded(self, a, b):
        for w in WINDOWS:
            s = ssim(a, b, w)
            assert s == pytest.approx(ssim(b, a, w), abs=1e-12)
            assert -1 - 1e-12 <= s <= 1 + 1e-12


class TestErrorMap:
    def test_identical(self, rng):
        a = rng.random((3, 4))
        assert not error_map(a, a).any()

    def test_zero_one(self):
        assert np.array_equal(error_map(np.zeros((2, 3)), np.ones((2, 3))), np.ones((2, 3)))

    def test_single_pixel(self):
        a = np.zeros((4, 4))
        b = a.copy()
        b[1, 2] = 0.3
        m = error_map(a, b)
        assert np.flatnonzero(m).tolist() == [6] and m[1, 2] == pytest.approx(0.3)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            error_map(np.zeros(3), np.zeros(4))


def test_quality_report(rng):
    a, b = rng.random((2, 12, 12))
    r = quality_report(a, b)
    assert r.psnr == psnr(a, b) and r.ssim == ssim(a, b) and r.error_map.shape == (12, 12)


def test_video_metrics(rng):
    a, b = rng.random((2, 3, 12, 12))
    assert video_psnr(a, b) == psnr(a.ravel(), b.ravel())
    assert video_ssim(a, b) == pytest.approx(np.mean([ssim(x, y) for x, y in zip(a, b)]))
