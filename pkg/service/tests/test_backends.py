import numpy as np
import pytest

from enhancer_service.backends import (
    BackendUnavailable,
    DiffusionBackend,
    ShapeError,
    StubBackend,
    box_blur,
    cfg_combine,
    identity_fill,
    make_backend,
    nearest_neighbor_fill,
)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


class TestCfgCombine:
    def test_zero_scales_reduce_to_unconditional(self, rng):
        e0, e1, e2 = (rng.normal(size=(4, 8, 8)) for _ in range(3))
        np.testing.assert_array_equal(cfg_combine(e0, e1, e2, 0.0, 0.0), e0)

    def test_image_scale_one_reduces_to_image_term(self, rng):
        e0, e1, e2 = (rng.normal(size=(4, 8, 8)) for _ in range(3))
        out = cfg_combine(e0, e1, e2, 1.0, 0.0)
        assert np.abs(out - e1).max() < 1e-12

    def test_matches_term_recomposition(self, rng):
        e0, e1, e2 = (rng.normal(size=(2, 16)) for _ in range(3))
        s_i, s_t = 2.5, 7.0
        out = cfg_combine(e0, e1, e2, s_i, s_t)
        expected = e0 + s_i * (e1 - e0) + s_t * (e2 - e1)
        assert np.abs(out - expected).max() < 1e-12

    def test_linear_in_each_argument(self, rng):
        e0, e1, e2 = (rng.normal(size=(3, 5)) for _ in range(3))
        d = rng.normal(size=(3, 5))
        s_i, s_t = 1.7, 3.1
        base = cfg_combine(e0, e1, e2, s_i, s_t)
        assert np.allclose(
            cfg_combine(e0 + d, e1, e2, s_i, s_t) - base, (1 - s_i) * d, atol=1e-12
        )
        assert np.allclose(
            cfg_combine(e0, e1 + d, e2, s_i, s_t) - base, (s_i - s_t) * d, atol=1e-12
        )
        assert np.allclose(cfg_combine(e0, e1, e2 + d, s_i, s_t) - base, s_t * d, atol=1e-12)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeError):
            cfg_combine(np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)), 1, 1)


class TestStubs:
    def test_identity(self, rng):
        img = rng.integers(0, 256, size=(5, 5, 3)).astype(np.uint8)
        assert np.array_equal(identity_fill(img), img)

    def test_blur_determinism(self, rng):
        img = rng.integers(0, 256, size=(9, 9, 3)).astype(np.uint8)
        assert np.array_equal(box_blur(img), box_blur(img))

    def test_maskfill_unmasked_untouched(self, rng):
        img = rng.integers(0, 256, size=(8, 8, 3)).astype(np.uint8)
        mask = (rng.uniform(size=(8, 8)) > 0.5).astype(np.uint8)
        out = nearest_neighbor_fill(img, mask)
        assert np.array_equal(out[mask == 0], img[mask == 0])

    def test_maskfill_all_masked_mean(self):
        img = np.zeros((4, 4, 3), dtype=np.uint8)
        img[:, :2] = 60
        out = nearest_neighbor_fill(img, np.ones((4, 4), dtype=np.uint8))
        assert np.all(out == 30)

    def test_unknown_stub(self):
        with pytest.raises(BackendUnavailable):
            StubBackend("stub-nope")


class TestDiffusionAdapter:
    def test_capabilities_off_without_pipelines(self):
        backend = DiffusionBackend()
        assert not backend.descriptor.inpaint and not backend.descriptor.clean
        with pytest.raises(BackendUnavailable):
            backend.clean(np.zeros((2, 2, 3), dtype=np.uint8), None)

    def test_injected_pipeline_used(self, rng):
        img = rng.integers(0, 256, size=(4, 4, 3)).astype(np.uint8)
        backend = DiffusionBackend(clean_pipeline=lambda image, params: image[::-1])
        assert backend.descriptor.clean and not backend.descriptor.inpaint
        assert np.array_equal(backend.clean(img, None), img[::-1])

    def test_make_backend(self):
        assert make_backend("stub-blur").descriptor.tag == "stub-blur"
        with pytest.raises(BackendUnavailable):
            make_backend("nope")
