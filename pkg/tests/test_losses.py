import numpy as np
import pytest

from splat360.errors import ShapeError
from splat360.losses import (
    dssim_loss,
    dssim_loss_grad,
    l1_loss,
    l1_loss_grad,
    pcc_depth_loss,
    photometric_loss_grad,
    sample_loss,
    ssim,
)


class TestL1:
    def test_identical(self, rng):
        a = rng.uniform(size=(8, 8, 3))
        assert l1_loss(a, a) == 0.0

    def test_unit_gap(self):
        assert l1_loss(np.zeros((4, 4)), np.ones((4, 4))) == 1.0

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            l1_loss(np.zeros((4, 4)), np.zeros((5, 4)))

    def test_grad_direction(self, rng):
        a = rng.uniform(size=(6, 6))
        b = rng.uniform(size=(6, 6))
        _, g = l1_loss_grad(a, b)
        np.testing.assert_allclose(g, np.sign(a - b) / a.size)


def windowed_ssim_oracle(a, b):
    """Direct sliding-window SSIM, independent of the filtering implementation."""
    from splat360.losses import SSIM_C1, SSIM_C2, _W1D

    w2d = np.outer(_W1D, _W1D)
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    h, w, ch = a.shape
    vals = []
    for c in range(ch):
        for i in range(h - 10):
            for j in range(w - 10):
                pa = a[i : i + 11, j : j + 11, c]
                pb = b[i : i + 11, j : j + 11, c]
                mx = (w2d * pa).sum()
                my = (w2d * pb).sum()
                vx = (w2d * pa * pa).sum() - mx * mx
                vy = (w2d * pb * pb).sum() - my * my
                cxy = (w2d * pa * pb).sum() - mx * my
                s = ((2 * mx * my + SSIM_C1) * (2 * cxy + SSIM_C2)) / (
                    (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2)
                )
                vals.append(s)
    return float(np.mean(vals))


class TestSSIM:
    def test_identical(self, rng):
        a = rng.uniform(size=(16, 16, 3))
        assert abs(ssim(a, a) - 1.0) < 1e-12
        assert dssim_loss(a, a) < 1e-12

    def test_matches_windowed_oracle(self, rng):
        for _ in range(3):
            a = rng.uniform(size=(14, 15))
            b = rng.uniform(size=(14, 15))
            assert abs(ssim(a, b) - windowed_ssim_oracle(a, b)) < 1e-6

    def test_matches_windowed_oracle_color(self, rng):
        a = rng.uniform(size=(13, 13, 3))
        b = rng.uniform(size=(13, 13, 3))
        assert abs(ssim(a, b) - windowed_ssim_oracle(a, b)) < 1e-6

    def test_constant_images_luminance_only(self):
        a = np.full((16, 16), 0.3)
        b = np.full((16, 16), 0.7)
        from splat360.losses import SSIM_C1

        expected = (2 * 0.3 * 0.7 + SSIM_C1) / (0.3 ** 2 + 0.7 ** 2 + SSIM_C1)
        assert abs(ssim(a, b) - expected) < 1e-12

    def test_anti_image_negative_on_structured(self, rng):
        x = rng.uniform(size=(24, 24))
        assert ssim(x, 1.0 - x) < 0.0

    def test_gradient_directional_derivative(self, rng):
        a = rng.uniform(0.2, 0.8, size=(16, 18, 3))
        b = rng.uniform(0.2, 0.8, size=(16, 18, 3))
        _, g = dssim_loss_grad(a, b)
        v = rng.normal(size=a.shape)
        h = 1e-5
        fd = (dssim_loss(a + h * v, b) - dssim_loss(a - h * v, b)) / (2 * h)
        an = float((g * v).sum())
        assert abs(fd - an) < 1e-7 * max(1.0, abs(fd))

    def test_too_small_raises(self):
        with pytest.raises(ShapeError):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))


class TestPcc:
    def test_identical_is_zero(self, rng):
        d = rng.uniform(1, 5, size=(10, 10))
        assert abs(pcc_depth_loss(d, d).loss) < 1e-12

    def test_anticorrelated_is_two(self, rng):
        d = rng.uniform(1, 5, size=(10, 10))
        res = pcc_depth_loss(d, -d + 10.0)
        assert abs(res.loss - 2.0) < 1e-12

    def test_affine_invariance_both_arguments(self, rng):
        for _ in range(1000):
            d1 = rng.uniform(0.5, 9.0, size=(8, 8))
            d2 = rng.uniform(0.5, 9.0, size=(8, 8))
            base = pcc_depth_loss(d1, d2).loss
            a, b = float(rng.uniform(0.1, 10)), float(rng.uniform(-5, 5))
            assert abs(pcc_depth_loss(d1, a * d2 + b).loss - base) < 1e-9
            assert abs(pcc_depth_loss(a * d1 + b, d2).loss - base) < 1e-9

    def test_range(self, rng):
        for _ in range(200):
            d1 = rng.normal(size=(6, 6))
            d2 = rng.normal(size=(6, 6))
            assert 0.0 <= pcc_depth_loss(d1, d2).loss <= 2.0

    def test_symmetry(self, rng):
        d1 = rng.uniform(size=(9, 9))
        d2 = rng.uniform(size=(9, 9))
        assert abs(pcc_depth_loss(d1, d2).loss - pcc_depth_loss(d2, d1).loss) < 1e-12

    def test_degenerate_constant(self):
        res = pcc_depth_loss(np.full((5, 5), 2.0), np.arange(25.0).reshape(5, 5))
        assert res.degenerate and res.loss == 1.0
        assert np.all(res.grad == 0)

    def test_degenerate_too_few_valid(self, rng):
        d = rng.uniform(size=(4, 4))
        valid = np.zeros((4, 4), dtype=bool)
        valid[0, 0] = True
        res = pcc_depth_loss(d, d, valid=valid)
        assert res.degenerate and res.loss == 1.0

    def test_gradient_fd(self, rng):
        d1 = rng.uniform(1, 5, size=(8, 8))
        d2 = rng.uniform(1, 5, size=(8, 8))
        res = pcc_depth_loss(d1, d2)
        h = 1e-6
        for _ in range(50):
            i, j = int(rng.integers(8)), int(rng.integers(8))
            orig = d1[i, j]
            d1[i, j] = orig + h
            up = pcc_depth_loss(d1, d2).loss
            d1[i, j] = orig - h
            down = pcc_depth_loss(d1, d2).loss
            d1[i, j] = orig
            fd = (up - down) / (2 * h)
            assert abs(fd - res.grad[i, j]) < 1e-6

    def test_valid_mask_restricts_gradient(self, rng):
        d1 = rng.uniform(size=(6, 6))
        d2 = rng.uniform(size=(6, 6))
        valid = rng.uniform(size=(6, 6)) > 0.4
        res = pcc_depth_loss(d1, d2, valid=valid)
        assert np.all(res.grad[~valid] == 0)


class TestSampleLoss:
    def test_identical_inputs(self, rng):
        a = rng.uniform(size=(16, 16, 3))
        val, g = sample_loss(a, a, 0.7)
        assert val < 1e-12

    def test_zero_weight(self, rng):
        a = rng.uniform(size=(16, 16, 3))
        b = rng.uniform(size=(16, 16, 3))
        val, g = sample_loss(a, b, 0.0)
        assert val == 0.0 and np.all(g == 0)

    def test_decomposition(self, rng):
        a = rng.uniform(size=(16, 16, 3))
        b = rng.uniform(size=(16, 16, 3))
        w = 0.37
        val, _ = sample_loss(a, b, w)
        expected = w * (l1_loss(a, b) + dssim_loss(a, b))
        assert abs(val - expected) < 1e-10

    def test_custom_perceptual(self, rng):
        a = rng.uniform(size=(12, 12, 3))
        b = rng.uniform(size=(12, 12, 3))
        mse = lambda x, y: (float(((x - y) ** 2).mean()), 2 * (x - y) / x.size)
        val, _ = sample_loss(a, b, 1.0, perceptual=mse)
        assert abs(val - (l1_loss(a, b) + ((a - b) ** 2).mean())) < 1e-12


def test_photometric_combination(rng):
    a = rng.uniform(size=(16, 16, 3))
    b = rng.uniform(size=(16, 16, 3))
    val, grad, l1v, dsv = photometric_loss_grad(a, b, lambda1=0.2)
    assert abs(val - (0.8 * l1v + 0.2 * dsv)) < 1e-12
