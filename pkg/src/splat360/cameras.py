"""SE(3) camera geometry: geodesic distances, view-subset selection,
pose interpolation and perturbation.

The view-selection heuristic greedily grows a stack of views, at each step
appending the pool view whose minimum geodesic distance to the stack ranks
n-th smallest, then sweeps n to maximize the spread of the chosen subset
subject to a registration probe succeeding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import quats
from .errors import (
    DuplicateView,
    InsufficientControlPoints,
    IntrinsicsMismatch,
    InvalidRotation,
    NoRegistrableSubset,
    RankOutOfRange,
)
from .scene_io import CameraPose

ORTHONORMAL_TOL = 1e-6


@dataclass(frozen=True)
class GeodesicConfig:
    """Weight of the translation term in the pose distance."""

    w_t: float = 0.1

    def __post_init__(self):
        if self.w_t < 0:
            raise ValueError("translation weight must be >= 0")


@dataclass
class SubsetResult:
    indices: list
    n_star: int
    max_pairwise: float
    sweep_log: list = field(default_factory=list)

    def to_dict(self):
        return {
            "indices": list(self.indices),
            "n_star": self.n_star,
            "max_pairwise": self.max_pairwise,
            "sweep_log": self.sweep_log,
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def _check_rotation(R):
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise InvalidRotation(f"rotation must be 3x3, got {R.shape}")
    err = np.abs(R.T @ R - np.eye(3)).max()
    if err > ORTHONORMAL_TOL or abs(np.linalg.det(R) - 1.0) > ORTHONORMAL_TOL:
        raise InvalidRotation(f"matrix is not a rotation (max deviation {err:.2e})")
    return R


def rodrigues_angle(R1, R2):
    """Relative rotation angle in [0, pi] from the trace of R1 @ R2.T."""
    R1 = _check_rotation(R1)
    R2 = _check_rotation(R2)
    c = (np.trace(R1 @ R2.T) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def geodesic_distance(p1: CameraPose, p2: CameraPose, cfg: GeodesicConfig = GeodesicConfig()):
    """Rotation angle plus weighted translation distance between two poses."""
    ang = rodrigues_angle(p1.rotation, p2.rotation)
    return ang + cfg.w_t * float(np.linalg.norm(p1.translation - p2.translation))


def distance_matrix(stack, pool, cfg: GeodesicConfig = GeodesicConfig()):
    """Pairwise geodesic distances, shape (len(stack), len(pool))."""
    stack_ids = {p.id for p in stack}
    pool_ids = {p.id for p in pool}
    if stack_ids & pool_ids:
        raise DuplicateView(f"stack and pool share view ids: {sorted(stack_ids & pool_ids)}")
    out = np.empty((len(stack), len(pool)))
    for i, a in enumerate(stack):
        for j, b in enumerate(pool):
            out[i, j] = geodesic_distance(a, b, cfg)
    return out


def _centroid_seed(poses):
    centers = np.stack([p.center for p in poses])
    centroid = centers.mean(axis=0)
    d = np.linalg.norm(centers - centroid, axis=1)
    return int(np.argmin(d))


def greedy_subset(poses, m, n, seed_index=None, cfg: GeodesicConfig = GeodesicConfig()):
    """Grow a subset of m view indices from seed_index using the rank-n rule.

    At each step, each pool view is scored by its minimum distance to the
    current stack; the view at the n-th smallest score joins the stack.
    Ties are broken by the lower list index, making the sweep deterministic.
    """
    N = len(poses)
    if not (1 <= m <= N):
        raise ValueError(f"m must be in [1, {N}], got {m}")
    if seed_index is None:
        seed_index = _centroid_seed(poses)
    stack = [seed_index]
    pool = [i for i in range(N) if i != seed_index]
    # min distance of each pool view to the current stack, updated incrementally
    min_d = {j: geodesic_distance(poses[seed_index], poses[j], cfg) for j in pool}
    while len(stack) < m:
        if n > len(pool):
            raise RankOutOfRange(
                f"rank n={n} exceeds pool size {len(pool)} at stack size {len(stack)}"
            )
        ranked = sorted(pool, key=lambda j: (min_d[j], j))
        chosen = ranked[n - 1]
        stack.append(chosen)
        pool.remove(chosen)
        for j in pool:
            dj = geodesic_distance(poses[chosen], poses[j], cfg)
            if dj < min_d[j]:
                min_d[j] = dj
    return stack


def max_pairwise_distance(poses, indices, cfg: GeodesicConfig = GeodesicConfig()):
    best = 0.0
    for a in range(len(indices)):
        for b in range(a + 1, len(indices)):
            d = geodesic_distance(poses[indices[a]], poses[indices[b]], cfg)
            if d > best:
                best = d
    return best


def always_succeed_probe(indices):
    """Default registration probe: every subset registers; point count = subset size."""
    return len(indices)


def select_view_subset(
    poses,
    m,
    cfg: GeodesicConfig = GeodesicConfig(),
    registration_probe=always_succeed_probe,
    seed_index=None,
):
    """Sweep the rank n upward, keep the subset with the largest pairwise spread.

    The sweep stops at the first n whose registration probe fails (returns
    None); among probed-successful ranks the subset maximizing the maximum
    pairwise geodesic distance wins.
    """
    N = len(poses)
    n_max = N - m + 1
    best = None
    sweep_log = []
    for n in range(1, n_max + 1):
        indices = greedy_subset(poses, m, n, seed_index=seed_index, cfg=cfg)
        spread = max_pairwise_distance(poses, indices, cfg)
        points = registration_probe(indices)
        sweep_log.append(
            {"n": n, "max_pairwise": spread, "points": points, "registered": points is not None}
        )
        if points is None:
            if n == 1:
                raise NoRegistrableSubset("registration probe failed at n=1")
            break
        if best is None or spread > best[1]:
            best = (n, spread, indices)
    n_star, spread, indices = best
    return SubsetResult(
        indices=list(indices), n_star=n_star, max_pairwise=spread, sweep_log=sweep_log
    )


# --------------------------------------------------------------------------
# Interpolation and perturbation


def slerp(q1, q2, u):
    """Constant-speed spherical interpolation along the shortest arc."""
    q1 = quats.normalize(q1)
    q2 = quats.normalize(q2)
    dot = float(np.dot(q1, q2))
    if dot < 0.0:
        q2 = -q2
        dot = -dot
    dot = min(dot, 1.0)
    theta = np.arccos(dot)
    if theta < 1e-9:
        out = (1.0 - u) * q1 + u * q2  # nearly parallel: lerp is exact enough
    else:
        s = np.sin(theta)
        out = (np.sin((1.0 - u) * theta) / s) * q1 + (np.sin(u * theta) / s) * q2
    return quats.normalize(out)


def spline_translation(control, u):
    """Interpolate a path through control points at parameter u in [0,1].

    Two control points degenerate to linear interpolation; three or more use
    a centripetal-free Catmull-Rom cubic through all points with clamped ends.
    """
    control = [np.asarray(c, dtype=np.float64).reshape(3) for c in control]
    if len(control) < 2:
        raise InsufficientControlPoints("need at least 2 control points")
    u = float(np.clip(u, 0.0, 1.0))
    if len(control) == 2:
        return (1.0 - u) * control[0] + u * control[1]
    n_seg = len(control) - 1
    s = u * n_seg
    seg = min(int(s), n_seg - 1)
    t = s - seg
    pts = control
    p0 = pts[seg - 1] if seg > 0 else pts[0]
    p1 = pts[seg]
    p2 = pts[seg + 1]
    p3 = pts[seg + 2] if seg + 2 < len(pts) else pts[-1]
    # uniform Catmull-Rom basis
    t2, t3 = t * t, t * t * t
    return 0.5 * (
        (2.0 * p1)
        + (-p0 + p2) * t
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2
        + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3
    )


def interpolate_pseudo_view(p1: CameraPose, p2: CameraPose, u):
    """Pose between p1 and p2: slerp on rotations, spline on translations."""
    if p1.intrinsics != p2.intrinsics:
        raise IntrinsicsMismatch(f"views {p1.id} and {p2.id} have different intrinsics")
    q = slerp(quats.from_rotmat(p1.rotation), quats.from_rotmat(p2.rotation), u)
    t = spline_translation([p1.translation, p2.translation], u)
    return CameraPose(
        intrinsics=p1.intrinsics,
        rotation=quats.to_rotmat(q),
        translation=t,
        id=f"interp:{p1.id}~{p2.id}:{u:.6f}",
    )


def perturb_camera(p: CameraPose, rot_sigma, trans_sigma, seed):
    """Randomly rotate and shift a pose; deterministic per seed.

    The rotation magnitude is drawn from N(0, rot_sigma^2) truncated (by
    redraw) at 3 sigma; the axis is uniform on the sphere. Translation noise
    is isotropic Gaussian.
    """
    if rot_sigma < 0 or trans_sigma < 0:
        raise ValueError("sigmas must be >= 0")
    rng = np.random.default_rng(seed)
    if rot_sigma > 0:
        angle = rng.normal(0.0, rot_sigma)
        while abs(angle) > 3.0 * rot_sigma:
            angle = rng.normal(0.0, rot_sigma)
        axis = rng.normal(size=3)
        while np.linalg.norm(axis) < 1e-12:
            axis = rng.normal(size=3)
        dR = quats.to_rotmat(quats.from_axis_angle(axis, angle))
    else:
        dR = np.eye(3)
    dt = rng.normal(0.0, trans_sigma, size=3) if trans_sigma > 0 else np.zeros(3)
    R = dR @ p.rotation
    # re-orthonormalize through the quaternion to keep pose invariants tight
    R = quats.to_rotmat(quats.from_rotmat(R))
    return CameraPose(
        intrinsics=p.intrinsics,
        rotation=R,
        translation=p.translation + dt,
        id=f"perturb:{p.id}:{seed}",
    )


def camera_extent(poses):
    """Radius of the camera rig: max center distance from the centroid, x1.1."""
    centers = np.stack([p.center for p in poses])
    centroid = centers.mean(axis=0)
    r = float(np.linalg.norm(centers - centroid, axis=1).max())
    return max(r * 1.1, 1e-6)
