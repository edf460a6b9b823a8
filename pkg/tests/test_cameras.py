import numpy as np
import pytest

from splat360 import quats
from splat360.cameras import (
    GeodesicConfig,
    camera_extent,
    distance_matrix,
    geodesic_distance,
    greedy_subset,
    interpolate_pseudo_view,
    max_pairwise_distance,
    perturb_camera,
    rodrigues_angle,
    select_view_subset,
    slerp,
    spline_translation,
)
from splat360.errors import (
    DuplicateView,
    InsufficientControlPoints,
    IntrinsicsMismatch,
    InvalidQuaternion,
    InvalidRotation,
    NoRegistrableSubset,
    RankOutOfRange,
)
from splat360.scene_io import CameraPose, Intrinsics
from splat360.synthetic import ring_poses, toy_intrinsics

from conftest import random_pose, random_unit_quat


class TestRodrigues:
    def test_identity(self):
        assert rodrigues_angle(np.eye(3), np.eye(3)) == 0.0

    def test_quarter_turn(self):
        Rz = quats.to_rotmat(quats.from_axis_angle([0, 0, 1], np.pi / 2))
        assert abs(rodrigues_angle(np.eye(3), Rz) - np.pi / 2) < 1e-12

    def test_quaternion_dot_oracle(self, rng):
        for _ in range(500):
            q1, q2 = random_unit_quat(rng), random_unit_quat(rng)
            theta = rodrigues_angle(quats.to_rotmat(q1), quats.to_rotmat(q2))
            expected = 2.0 * np.arccos(min(abs(float(np.dot(q1, q2))), 1.0))
            assert abs(theta - expected) < 1e-9

    def test_rejects_non_rotation(self):
        with pytest.raises(InvalidRotation):
            rodrigues_angle(np.eye(3) * 1.01, np.eye(3))

    def test_range(self, rng):
        for _ in range(200):
            a = quats.to_rotmat(random_unit_quat(rng))
            b = quats.to_rotmat(random_unit_quat(rng))
            assert 0.0 <= rodrigues_angle(a, b) <= np.pi


class TestGeodesic:
    def test_identical_poses(self, rng):
        p = random_pose(rng)
        assert geodesic_distance(p, p) == 0.0

    def test_pure_translation(self, rng):
        intr = toy_intrinsics(32)
        p1 = CameraPose(intrinsics=intr, rotation=np.eye(3), translation=np.zeros(3), id=0)
        p2 = CameraPose(intrinsics=intr, rotation=np.eye(3), translation=np.array([0, 0, 10.0]), id=1)
        assert abs(geodesic_distance(p1, p2, GeodesicConfig(w_t=0.1)) - 1.0) < 1e-12

    def test_direct_formula_oracle(self, rng):
        cfg = GeodesicConfig(w_t=0.37)
        for _ in range(300):
            p1, p2 = random_pose(rng, 0), random_pose(rng, 1)
            c = (np.trace(p1.rotation @ p2.rotation.T) - 1.0) / 2.0
            expected = np.arccos(np.clip(c, -1, 1)) + 0.37 * np.linalg.norm(
                p1.translation - p2.translation
            )
            assert abs(geodesic_distance(p1, p2, cfg) - expected) < 1e-12

    def test_metric_axioms(self, rng):
        cfg = GeodesicConfig()
        for _ in range(1000):
            a, b, c = (random_pose(rng, i) for i in range(3))
            dab = geodesic_distance(a, b, cfg)
            dba = geodesic_distance(b, a, cfg)
            assert abs(dab - dba) < 1e-9
            assert dab >= 0.0
            dac = geodesic_distance(a, c, cfg)
            dbc = geodesic_distance(b, c, cfg)
            assert dac <= dab + dbc + 1e-9


class TestDistanceMatrix:
    def test_1x1(self, rng):
        m = distance_matrix([random_pose(rng, 0)], [random_pose(rng, 1)])
        assert m.shape == (1, 1)

    def test_transpose_symmetry(self, rng):
        a = [random_pose(rng, i) for i in range(3)]
        b = [random_pose(rng, 10 + i) for i in range(4)]
        np.testing.assert_allclose(distance_matrix(a, b), distance_matrix(b, a).T, atol=1e-12)

    def test_elementwise_oracle(self, rng):
        a = [random_pose(rng, i) for i in range(3)]
        b = [random_pose(rng, 10 + i) for i in range(4)]
        m = distance_matrix(a, b)
        for i in range(3):
            for j in range(4):
                assert m[i, j] == geodesic_distance(a[i], b[j])

    def test_duplicate_ids(self, rng):
        p = random_pose(rng, 7)
        with pytest.raises(DuplicateView):
            distance_matrix([p], [p])


def greedy_trace_oracle(poses, m, n, seed_index, cfg):
    """Independent re-simulation of the rank-n greedy growth."""
    stack = [seed_index]
    pool = [i for i in range(len(poses)) if i != seed_index]
    while len(stack) < m:
        scored = sorted(
            ((min(geodesic_distance(poses[s], poses[j], cfg) for s in stack), j) for j in pool)
        )
        chosen = scored[n - 1][1]
        stack.append(chosen)
        pool.remove(chosen)
    return stack


class TestGreedySubset:
    def test_full_selection(self, rng):
        poses = [random_pose(rng, i) for i in range(5)]
        out = greedy_subset(poses, 5, 1, seed_index=0)
        assert sorted(out) == [0, 1, 2, 3, 4]

    def test_matches_trace_oracle_on_hexagon(self):
        poses = ring_poses(6, 1.0, toy_intrinsics(16), height=0.0)
        cfg = GeodesicConfig()
        got = greedy_subset(poses, 3, 3, seed_index=0, cfg=cfg)
        expected = greedy_trace_oracle(poses, 3, 3, 0, cfg)
        assert got == expected
        # alternating-style subsets spread wider than adjacent ones
        assert max_pairwise_distance(poses, got, cfg) > max_pairwise_distance(
            poses, [0, 1, 2], cfg
        )

    def test_nearest_rank_on_line_is_contiguous(self):
        intr = toy_intrinsics(16)
        poses = [
            CameraPose(
                intrinsics=intr,
                rotation=np.eye(3),
                translation=np.array([float(i), 0.0, 0.0]),
                id=i,
            )
            for i in range(7)
        ]
        out = greedy_subset(poses, 4, 1, seed_index=0)
        assert out == greedy_trace_oracle(poses, 4, 1, 0, GeodesicConfig())
        assert sorted(out) == list(range(min(out), min(out) + 4))

    def test_matches_trace_oracle_random(self, rng):
        for _ in range(25):
            n_poses = int(rng.integers(4, 10))
            poses = [random_pose(rng, i) for i in range(n_poses)]
            m = int(rng.integers(2, n_poses + 1))
            n = int(rng.integers(1, n_poses - m + 2))
            seed = int(rng.integers(n_poses))
            cfg = GeodesicConfig()
            assert greedy_subset(poses, m, n, seed, cfg) == greedy_trace_oracle(
                poses, m, n, seed, cfg
            )

    def test_rank_out_of_range(self, rng):
        poses = [random_pose(rng, i) for i in range(4)]
        with pytest.raises(RankOutOfRange):
            greedy_subset(poses, 3, 4, seed_index=0)

    def test_pool_order_independence_with_ties(self):
        # exact ties resolved by index, not encounter order
        intr = toy_intrinsics(16)
        poses = [
            CameraPose(
                intrinsics=intr,
                rotation=np.eye(3),
                translation=np.array([0.0, 0.0, 0.0]),
                id=0,
            ),
            CameraPose(intrinsics=intr, rotation=np.eye(3), translation=np.array([1.0, 0, 0]), id=1),
            CameraPose(intrinsics=intr, rotation=np.eye(3), translation=np.array([-1.0, 0, 0]), id=2),
            CameraPose(intrinsics=intr, rotation=np.eye(3), translation=np.array([0, 1.0, 0]), id=3),
        ]
        out = greedy_subset(poses, 2, 1, seed_index=0)
        assert out == [0, 1]


def sweep_oracle(poses, m, cfg, probe):
    """Exhaustive re-simulation of the select sweep."""
    best = None
    for n in range(1, len(poses) - m + 2):
        indices = greedy_trace_oracle(poses, m, n, _centroid(poses), cfg)
        if probe(indices) is None:
            break
        spread = max_pairwise_distance(poses, indices, cfg)
        if best is None or spread > best[0]:
            best = (spread, n, indices)
    return best


def _centroid(poses):
    centers = np.stack([p.center for p in poses])
    d = np.linalg.norm(centers - centers.mean(axis=0), axis=1)
    return int(np.argmin(d))


class TestSelectViewSubset:
    def test_equals_exhaustive_sweep(self, rng):
        for trial in range(12):
            n_poses = int(rng.integers(5, 13))
            m = int(rng.integers(2, min(6, n_poses)))
            poses = [random_pose(rng, i) for i in range(n_poses)]
            cfg = GeodesicConfig()
            result = select_view_subset(poses, m, cfg)
            spread, n_star, indices = sweep_oracle(poses, m, cfg, lambda idx: len(idx))
            assert result.n_star == n_star
            assert result.indices == indices
            assert abs(result.max_pairwise - spread) < 1e-12

    def test_probe_failure_after_first(self, rng):
        poses = [random_pose(rng, i) for i in range(8)]
        calls = {"n": 0}

        def failing_after_first(idx):
            calls["n"] += 1
            return 10 if calls["n"] == 1 else None

        forced = select_view_subset(poses, 3, registration_probe=failing_after_first)
        assert forced.n_star == 1
        assert len(forced.sweep_log) == 2

    def test_no_registrable_subset(self, rng):
        poses = [random_pose(rng, i) for i in range(5)]
        with pytest.raises(NoRegistrableSubset):
            select_view_subset(poses, 2, registration_probe=lambda idx: None)

    def test_spread_non_monotone_in_rank_on_jittered_ring(self):
        jrng = np.random.default_rng(5)
        poses = ring_poses(12, 2.0, toy_intrinsics(16), jitter=0.15, rng=jrng)
        result = select_view_subset(poses, 4)
        spreads = [row["max_pairwise"] for row in result.sweep_log]
        diffs = np.diff(spreads)
        assert result.max_pairwise == max(spreads)
        # increasing trend overall but not monotone step-by-step
        assert spreads[-1] > spreads[0] or result.n_star > 1
        assert (diffs < 0).any() or (diffs > 0).any()

    def test_result_serializes(self, rng):
        import json

        poses = [random_pose(rng, i) for i in range(6)]
        result = select_view_subset(poses, 3)
        parsed = json.loads(result.to_json())
        assert parsed["indices"] == result.indices
        assert len(parsed["sweep_log"]) == len(result.sweep_log)


class TestSlerp:
    def test_endpoints(self, rng):
        q1, q2 = random_unit_quat(rng), random_unit_quat(rng)
        np.testing.assert_allclose(slerp(q1, q2, 0.0), q1, atol=1e-12)
        end = slerp(q1, q2, 1.0)
        assert min(np.linalg.norm(end - q2), np.linalg.norm(end + q2)) < 1e-12

    def test_halfway_quarter_turn(self):
        q1 = np.array([1.0, 0, 0, 0])
        q2 = quats.from_axis_angle([0, 0, 1], np.pi / 2)
        mid = slerp(q1, q2, 0.5)
        expected = quats.from_axis_angle([0, 0, 1], np.pi / 4)
        np.testing.assert_allclose(mid, expected, atol=1e-12)

    def test_angle_proportionality(self, rng):
        for _ in range(200):
            q1, q2 = random_unit_quat(rng), random_unit_quat(rng)
            total = 2.0 * np.arccos(min(abs(float(np.dot(q1, q2))), 1.0))
            u = float(rng.uniform())
            out = slerp(q1, q2, u)
            assert abs(np.linalg.norm(out) - 1.0) < 1e-12
            part = 2.0 * np.arccos(min(abs(float(np.dot(q1, out))), 1.0))
            assert abs(part - u * total) < 1e-9

    def test_zero_quaternion(self):
        with pytest.raises(InvalidQuaternion):
            slerp(np.zeros(4), np.array([1.0, 0, 0, 0]), 0.5)


class TestSplineTranslation:
    def test_two_point_midpoint(self):
        a, b = np.array([0.0, 0, 0]), np.array([2.0, 4.0, 6.0])
        np.testing.assert_allclose(spline_translation([a, b], 0.5), (a + b) / 2, atol=1e-12)

    def test_endpoints(self, rng):
        pts = [rng.normal(size=3) for _ in range(5)]
        np.testing.assert_allclose(spline_translation(pts, 0.0), pts[0], atol=1e-12)
        np.testing.assert_allclose(spline_translation(pts, 1.0), pts[-1], atol=1e-12)

    def test_collinear_stays_on_line(self):
        d = np.array([1.0, -2.0, 0.5])
        pts = [k * d for k in range(4)]
        for u in np.linspace(0, 1, 33):
            out = spline_translation(pts, u)
            # projection residual orthogonal to d must vanish
            coeff = float(out @ d) / float(d @ d)
            np.testing.assert_allclose(out, coeff * d, atol=1e-9)

    def test_too_few_points(self):
        with pytest.raises(InsufficientControlPoints):
            spline_translation([np.zeros(3)], 0.5)


class TestInterpolatePseudoView:
    def test_u0_matches_first(self, rng):
        intr = toy_intrinsics(32)
        p1, p2 = random_pose(rng, 0, intr), random_pose(rng, 1, intr)
        out = interpolate_pseudo_view(p1, p2, 0.0)
        np.testing.assert_allclose(out.rotation, p1.rotation, atol=1e-9)
        np.testing.assert_allclose(out.translation, p1.translation, atol=1e-12)
        assert out.id != p1.id

    def test_translation_only_midpoint(self, rng):
        intr = toy_intrinsics(32)
        R = quats.to_rotmat(random_unit_quat(rng))
        p1 = CameraPose(intrinsics=intr, rotation=R, translation=np.array([0.0, 0, 0]), id=0)
        p2 = CameraPose(intrinsics=intr, rotation=R, translation=np.array([2.0, 0, 0]), id=1)
        out = interpolate_pseudo_view(p1, p2, 0.5)
        np.testing.assert_allclose(out.rotation, R, atol=1e-9)
        np.testing.assert_allclose(out.translation, [1.0, 0, 0], atol=1e-12)

    def test_invariants_hold_for_random_inputs(self, rng):
        intr = toy_intrinsics(32)
        for _ in range(100):
            p1, p2 = random_pose(rng, 0, intr), random_pose(rng, 1, intr)
            out = interpolate_pseudo_view(p1, p2, float(rng.uniform()))
            R = out.rotation
            assert np.abs(R.T @ R - np.eye(3)).max() < 1e-9

    def test_intrinsics_mismatch(self, rng):
        p1 = random_pose(rng, 0, toy_intrinsics(32))
        p2 = random_pose(rng, 1, toy_intrinsics(64))
        with pytest.raises(IntrinsicsMismatch):
            interpolate_pseudo_view(p1, p2, 0.5)


class TestPerturbCamera:
    def test_zero_sigmas_identity(self, rng):
        p = random_pose(rng)
        out = perturb_camera(p, 0.0, 0.0, seed=3)
        np.testing.assert_allclose(out.rotation, p.rotation, atol=1e-12)
        np.testing.assert_allclose(out.translation, p.translation, atol=1e-12)

    def test_seed_determinism(self, rng):
        p = random_pose(rng)
        a = perturb_camera(p, 0.1, 0.2, seed=11)
        b = perturb_camera(p, 0.1, 0.2, seed=11)
        assert np.array_equal(a.rotation, b.rotation)
        assert np.array_equal(a.translation, b.translation)

    def test_monte_carlo_mean_angle(self, rng):
        from scipy.stats import norm

        sigma = 0.05
        p = random_pose(rng)
        angles = [
            rodrigues_angle(p.rotation, perturb_camera(p, sigma, 0.0, seed=s).rotation)
            for s in range(10_000)
        ]
        trunc_factor = (1.0 - np.exp(-4.5)) / (2.0 * norm.cdf(3.0) - 1.0)
        expected = sigma * np.sqrt(2.0 / np.pi) * trunc_factor
        assert abs(np.mean(angles) - expected) / expected < 0.05


def test_camera_extent_positive(rng):
    poses = [random_pose(rng, i) for i in range(5)]
    assert camera_extent(poses) > 0
