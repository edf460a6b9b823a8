"""Synthetic toy scenes: a known Gaussian cloud observed from a camera ring.

Used by the verification suite and the demo scripts: the ground-truth cloud
renders the "photographs", its rendered depth doubles as the estimated-depth
input, and a jittered subsample of the Gaussian centers stands in for the
SfM point cloud.
"""

from __future__ import annotations

import numpy as np

from .gaussians import GaussianCloud, logit
from .render import render
from .scene_io import CameraPose, Intrinsics, Scene, SparsePointCloud


def random_cloud(n_gaussians, rng, radius=1.0, scale_range=(0.08, 0.25), opacity=(0.4, 0.95)):
    """Random anisotropic Gaussians clustered inside a sphere."""
    means = rng.normal(size=(n_gaussians, 3)) * radius * 0.5
    log_scales = np.log(rng.uniform(*scale_range, size=(n_gaussians, 3)) * radius)
    q = rng.normal(size=(n_gaussians, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    ops = rng.uniform(*opacity, size=n_gaussians)
    colors = rng.uniform(0.1, 0.9, size=(n_gaussians, 3))
    return GaussianCloud(
        means=means,
        log_scales=log_scales,
        rotations=q,
        opacity_logits=logit(ops),
        colors=colors,
    )


def look_at_pose(position, target, up, intrinsics, view_id):
    """World->camera pose for a camera at `position` looking at `target`."""
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    forward = target - position
    forward = forward / np.linalg.norm(forward)
    up = np.asarray(up, dtype=np.float64)
    right = np.cross(forward, up)
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])  # rows: camera axes in world coords
    t = -R @ position
    return CameraPose(intrinsics=intrinsics, rotation=R, translation=t, id=view_id)


def ring_poses(n_views, radius, intrinsics, height=0.6, target=(0.0, 0.0, 0.0), jitter=0.0, rng=None):
    """Cameras evenly spaced on a circle, all looking at the target."""
    poses = []
    for i in range(n_views):
        ang = 2.0 * np.pi * i / n_views
        pos = np.array([radius * np.cos(ang), radius * np.sin(ang), height])
        if jitter > 0 and rng is not None:
            pos = pos + rng.normal(scale=jitter, size=3)
        poses.append(look_at_pose(pos, target, (0.0, 0.0, 1.0), intrinsics, view_id=i))
    return poses


def toy_intrinsics(size=64, fov_scale=1.2):
    f = size * fov_scale
    return Intrinsics(fx=f, fy=f, cx=size / 2.0, cy=size / 2.0, width=size, height=size)


def background_shell(n_gaussians, rng, shell_radius, height_spread=1.5):
    """Fuzzy Gaussians on a cylinder outside the camera ring.

    Each is visible only from roughly the opposite side of the ring, giving
    the scene direction-dependent content like the backdrop of a real
    360-degree capture."""
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n_gaussians)
    z = rng.uniform(-height_spread, height_spread, size=n_gaussians)
    means = np.stack([shell_radius * np.cos(phi), shell_radius * np.sin(phi), z], axis=1)
    log_scales = np.log(rng.uniform(0.22, 0.42, size=(n_gaussians, 3)))
    q = rng.normal(size=(n_gaussians, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return GaussianCloud(
        means=means,
        log_scales=log_scales,
        rotations=q,
        opacity_logits=logit(rng.uniform(0.5, 0.95, size=n_gaussians)),
        colors=rng.uniform(0.1, 0.9, size=(n_gaussians, 3)),
    )


def make_ring_scene(
    n_gaussians=20,
    n_views=30,
    image_size=64,
    ring_radius=4.0,
    seed=0,
    point_count=120,
    point_jitter=0.02,
    background=(0.0, 0.0, 0.0),
    with_depth=True,
    background_fraction=0.35,
):
    """Build a fully synthetic scene plus the ground-truth cloud it came from.

    Returns (scene, gt_cloud). Scene images are renders of gt_cloud; depths
    (when requested) are the corresponding rendered expected-depth rasters.
    A fraction of the Gaussians forms a backdrop shell outside the camera
    ring, so each view only observes its own slice of background.
    """
    rng = np.random.default_rng(seed)
    n_bg = int(round(n_gaussians * background_fraction))
    central = random_cloud(n_gaussians - n_bg, rng)
    if n_bg > 0:
        shell = background_shell(n_bg, rng, shell_radius=ring_radius * 1.7)
        gt_cloud = GaussianCloud.concatenate([central, shell])
    else:
        gt_cloud = central
    intr = toy_intrinsics(image_size)
    poses = ring_poses(n_views, ring_radius, intr)

    images, depths = [], []
    for pose in poses:
        out = render(gt_cloud, pose, background)
        images.append(out.color)
        depths.append(out.depth if with_depth else None)

    # SfM stand-in: jittered draws from the Gaussian centers
    pick = rng.integers(0, n_gaussians, size=point_count)
    pts = gt_cloud.means[pick] + rng.normal(scale=point_jitter, size=(point_count, 3))
    cols = np.clip(
        gt_cloud.colors[pick] + rng.normal(scale=0.05, size=(point_count, 3)), 0.0, 1.0
    )
    cloud_pts = SparsePointCloud(points=pts, colors=cols)

    scene = Scene(
        poses=tuple(poses),
        images=tuple(images),
        point_cloud=cloud_pts,
        depths=tuple(depths) if with_depth else None,
    )
    return scene, gt_cloud


def subset_scene(scene, indices, point_subsample=None, rng=None):
    """Scene restricted to the given view indices (point cloud shared)."""
    pc = scene.point_cloud
    if point_subsample is not None and rng is not None and len(pc) > point_subsample:
        pick = rng.choice(len(pc), size=point_subsample, replace=False)
        pc = SparsePointCloud(points=pc.points[pick], colors=pc.colors[pick])
    return Scene(
        poses=tuple(scene.poses[i] for i in indices),
        images=tuple(scene.images[i] for i in indices),
        point_cloud=pc,
        depths=(
            tuple(scene.depths[i] for i in indices) if scene.depths is not None else None
        ),
    )
