import numpy as np
import pytest

from splat360 import quats
from splat360.errors import CulledGaussian, InvalidThreshold, ShapeError
from splat360.gaussians import GaussianCloud, logit, sigmoid
from splat360.render import (
    LOWPASS_2D,
    opacity_mask,
    project_gaussian,
    render,
    render_backward,
)
from splat360.scene_io import CameraPose
from splat360.synthetic import look_at_pose, toy_intrinsics

from conftest import random_unit_quat


def front_camera(size=16, dist=4.0, f_scale=1.0):
    intr = toy_intrinsics(size, fov_scale=f_scale)
    return look_at_pose([0, 0, -dist], [0, 0, 0], [0, 1, 0], intr, 0)


def single_gaussian(mean=(0, 0, 0), scale=0.3, opacity=0.8, color=(1.0, 0.0, 0.0)):
    return GaussianCloud(
        means=np.array([mean], dtype=float),
        log_scales=np.log(np.full((1, 3), scale)),
        rotations=np.array([[1.0, 0, 0, 0]]),
        opacity_logits=np.array([float(logit(opacity))]),
        colors=np.array([color], dtype=float),
    )


class TestProjection:
    def test_on_axis_closed_form(self):
        cam = front_camera(size=32, dist=4.0)
        f = cam.intrinsics.fx
        sigma, d = 0.2, 4.0
        mean2d, cov2, depth = project_gaussian(
            [0, 0, 0], [sigma] * 3, [1, 0, 0, 0], cam
        )
        expected = (f * sigma / d) ** 2
        np.testing.assert_allclose(
            cov2, expected * np.eye(2) + LOWPASS_2D * np.eye(2), rtol=1e-9
        )
        assert abs(depth - d) < 1e-12
        np.testing.assert_allclose(mean2d, [16.0, 16.0], atol=1e-9)

    def test_behind_camera_culled(self):
        cam = front_camera()
        with pytest.raises(CulledGaussian):
            project_gaussian([0, 0, -10.0], [0.1] * 3, [1, 0, 0, 0], cam)

    def test_rotation_invariance_of_isotropic(self, rng):
        cam = front_camera()
        _, base, _ = project_gaussian([0.2, -0.1, 0.3], [0.25] * 3, [1, 0, 0, 0], cam)
        for _ in range(10):
            _, rotated, _ = project_gaussian(
                [0.2, -0.1, 0.3], [0.25] * 3, random_unit_quat(rng), cam
            )
            np.testing.assert_allclose(rotated, base, atol=1e-9)


class TestRenderForward:
    def test_empty_cloud(self):
        cam = front_camera()
        cloud = GaussianCloud(
            means=np.zeros((0, 3)),
            log_scales=np.zeros((0, 3)),
            rotations=np.zeros((0, 4)),
            opacity_logits=np.zeros(0),
            colors=np.zeros((0, 3)),
        )
        out = render(cloud, cam, background=(0.2, 0.4, 0.6))
        np.testing.assert_allclose(out.color, np.broadcast_to([0.2, 0.4, 0.6], out.color.shape))
        assert np.all(out.alpha == 0)
        assert np.all(out.depth == 0)

    def test_single_gaussian_alpha_unimodal(self):
        cam = front_camera(size=17)
        out = render(single_gaussian(scale=0.3, opacity=0.9), cam)
        alpha = out.alpha
        peak = np.unravel_index(np.argmax(alpha), alpha.shape)
        assert peak == (8, 8)
        center_row = alpha[8, :]
        assert np.all(np.diff(center_row[:9]) >= -1e-12)
        assert np.all(np.diff(center_row[8:]) <= 1e-12)
        center_col = alpha[:, 8]
        assert np.all(np.diff(center_col[:9]) >= -1e-12)
        assert np.all(np.diff(center_col[8:]) <= 1e-12)

    def test_two_gaussian_compositing_oracle(self):
        cam = front_camera(size=16)
        bg = np.array([0.1, 0.2, 0.3])
        c1, c2 = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
        cloud = GaussianCloud(
            means=np.array([[0, 0, -0.5], [0, 0, 0.5]]),
            log_scales=np.log(np.full((2, 3), 0.4)),
            rotations=np.array([[1.0, 0, 0, 0]] * 2),
            opacity_logits=logit(np.array([0.6, 0.7])),
            colors=np.stack([c1, c2]),
        )
        out = render(cloud, cam, bg)
        # per-pixel alphas from the projection itself
        m1, cov1, z1 = project_gaussian([0, 0, -0.5], [0.4] * 3, [1, 0, 0, 0], cam)
        m2, cov2, z2 = project_gaussian([0, 0, 0.5], [0.4] * 3, [1, 0, 0, 0], cam)
        px = np.array([8.5, 8.5])
        a1 = 0.6 * np.exp(-0.5 * (px - m1) @ np.linalg.inv(cov1) @ (px - m1))
        a2 = 0.7 * np.exp(-0.5 * (px - m2) @ np.linalg.inv(cov2) @ (px - m2))
        expected = c1 * a1 + c2 * a2 * (1 - a1) + bg * (1 - a1) * (1 - a2)
        np.testing.assert_allclose(out.color[8, 8], expected, atol=1e-6)

    def test_transparent_gaussian_is_no_op(self, rng):
        cam = front_camera()
        cloud = GaussianCloud(
            means=rng.uniform(-0.5, 0.5, (4, 3)),
            log_scales=np.log(rng.uniform(0.2, 0.4, (4, 3))),
            rotations=rng.normal(size=(4, 4)),
            opacity_logits=logit(rng.uniform(0.3, 0.8, 4)),
            colors=rng.uniform(0, 1, (4, 3)),
        )
        base = render(cloud, cam)
        extended = GaussianCloud.concatenate(
            [cloud, single_gaussian(mean=(0, 0, 0.1), opacity=0.5)]
        )
        extended.opacity_logits[-1] = -60.0  # alpha ~ 1e-26
        out = render(extended, cam)
        assert np.abs(out.color - base.color).max() < 1e-7
        assert np.abs(out.alpha - base.alpha).max() < 1e-7

    def test_color_bounded_by_alpha_black_bg(self, rng):
        cam = front_camera()
        cloud = GaussianCloud(
            means=rng.uniform(-0.6, 0.6, (6, 3)),
            log_scales=np.log(rng.uniform(0.1, 0.5, (6, 3))),
            rotations=rng.normal(size=(6, 4)),
            opacity_logits=logit(rng.uniform(0.2, 0.9, 6)),
            colors=rng.uniform(0, 1, (6, 3)),
        )
        out = render(cloud, cam, background=(0, 0, 0))
        assert np.all(out.alpha <= 1.0) and np.all(out.alpha >= 0.0)
        assert np.all(out.color <= out.alpha[:, :, None] + 1e-6)

    def test_deterministic(self, rng):
        cam = front_camera()
        cloud = GaussianCloud(
            means=rng.uniform(-0.5, 0.5, (5, 3)),
            log_scales=np.log(rng.uniform(0.1, 0.4, (5, 3))),
            rotations=rng.normal(size=(5, 4)),
            opacity_logits=logit(rng.uniform(0.2, 0.8, 5)),
            colors=rng.uniform(0, 1, (5, 3)),
        )
        a, b = render(cloud, cam), render(cloud, cam)
        assert np.array_equal(a.color, b.color)
        assert np.array_equal(a.depth, b.depth)
        assert np.array_equal(a.alpha, b.alpha)

    def test_peak_pixel_depth_equals_view_depth(self):
        cam = front_camera(size=17, dist=4.0)
        out = render(single_gaussian(scale=0.3, opacity=0.8), cam)
        assert abs(out.depth[8, 8] - 4.0) < 1e-4


class TestOpacityMask:
    def test_opaque_gives_empty_mask(self):
        assert opacity_mask(np.ones((4, 4)), 0.8).sum() == 0

    def test_transparent_gives_full_mask(self):
        assert opacity_mask(np.zeros((4, 4)), 0.8).sum() == 16

    def test_monotone_in_tau(self, rng):
        for _ in range(50):
            alpha = rng.uniform(0, 1, size=(12, 12))
            taus = np.sort(rng.uniform(0.05, 0.95, size=5))
            counts = [opacity_mask(alpha, float(t)).sum() for t in taus]
            assert all(a <= b for a, b in zip(counts, counts[1:]))

    def test_invalid_tau(self):
        with pytest.raises(InvalidThreshold):
            opacity_mask(np.zeros((2, 2)), 1.5)


class TestBackwardBasics:
    def test_zero_seeds_zero_grads(self, rng):
        cam = front_camera()
        cloud = single_gaussian()
        g = render_backward(cloud, cam, (0, 0, 0), np.zeros((16, 16, 3)), np.zeros((16, 16)))
        for f in GaussianCloud.PARAM_FIELDS:
            assert np.all(getattr(g, f) == 0)

    def test_single_gaussian_color_grad_is_weight_sum(self):
        cam = front_camera(size=16)
        cloud = single_gaussian(scale=0.3, opacity=0.7)
        from splat360.render import render_with_aux

        out, aux = render_with_aux(cloud, cam)
        grad_color = np.zeros((16, 16, 3))
        grad_color[:, :, 0] = 1.0  # L = sum of red channel
        g = render_backward(cloud, cam, (0, 0, 0), grad_color, np.zeros((16, 16)), aux=aux)
        # d L / d c_red = sum over pixels of w = accumulated alpha
        assert abs(g.colors[0, 0] - out.alpha.sum()) < 1e-9
        assert g.colors[0, 1] == 0.0

    def test_shape_error(self):
        cam = front_camera()
        with pytest.raises(ShapeError):
            render_backward(single_gaussian(), cam, (0, 0, 0), np.zeros((8, 8, 3)), np.zeros((8, 8)))
