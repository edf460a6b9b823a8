"""Regularized sparse-view fitting of a Gaussian cloud.

Combines the photometric objective with a Pearson depth term against
per-view estimated depth and a depth-only term on interpolated pseudo views,
plus adaptive densification with a tunable positional-gradient threshold and
configurable opacity resets. The sparse preset disables opacity resets,
raises the densification threshold 5x, and enables both depth terms; the
dense preset is the plain baseline configuration.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .cameras import camera_extent, geodesic_distance, interpolate_pseudo_view
from .errors import EmptyCloud, InitializationError
from .gaussians import GaussianCloud, init_from_point_cloud, logit
from .losses import l1_loss_grad, dssim_loss_grad, pcc_depth_loss
from .metrics import psnr
from .render import render, render_backward, render_with_aux

DEPTH_ALPHA_MASK = 0.05  # rendered depth is meaningful only where alpha exceeds this


@dataclass
class SparseConfig:
    lambda1: float = 0.2
    lambda_depth: float = 0.05
    lambda_pseudo: float = 0.05
    tau_pos: float = 0.001
    opacity_reset_interval: int = 0  # 0 = never
    opacity_reset_cap: float = 0.01
    pseudo_start_iter: int = 2000
    total_iters: int = 30000
    densify_interval: int = 100
    densify_start: int = 500
    densify_until: int = 0  # 0 = total_iters // 2
    prune_opacity: float = 0.005
    percent_dense: float = 0.01
    max_gaussians: int = 0  # 0 = unlimited; cap on densification growth
    checkpoint_interval: int = 1000
    background: tuple = (0.0, 0.0, 0.0)
    lr_means: float = 1.6e-4  # scaled by scene extent, exponentially decayed
    lr_means_final: float = 1.6e-6
    lr_colors: float = 2.5e-3
    lr_opacities: float = 5e-2
    lr_scales: float = 5e-3
    lr_rotations: float = 1e-3
    pseudo_u: tuple = (0.3, 0.7)

    def __post_init__(self):
        if min(self.lambda1, self.lambda_depth, self.lambda_pseudo) < 0:
            raise ValueError("loss weights must be >= 0")
        if self.tau_pos <= 0:
            raise ValueError("tau_pos must be > 0")
        if self.lambda_pseudo > 0 and self.pseudo_start_iter > self.total_iters:
            raise ValueError("pseudo_start_iter must not exceed total_iters")

    @property
    def densify_end(self):
        return self.densify_until if self.densify_until > 0 else self.total_iters // 2

    @classmethod
    def dense_preset(cls, **overrides):
        """Plain baseline: resets every 3k iterations, default threshold."""
        cfg = dict(
            lambda_depth=0.0,
            lambda_pseudo=0.0,
            tau_pos=0.0002,
            opacity_reset_interval=3000,
        )
        cfg.update(overrides)
        return cls(**cfg)

    @classmethod
    def sparse_preset(cls, **overrides):
        """Few-view preset: no opacity resets, 5x threshold, depth terms on."""
        cfg = dict(
            lambda_depth=0.05,
            lambda_pseudo=0.05,
            tau_pos=0.001,
            opacity_reset_interval=0,
        )
        cfg.update(overrides)
        return cls(**cfg)

    def scaled(self, total_iters):
        """Rescale iteration-count fields proportionally to a new budget."""
        f = total_iters / self.total_iters
        return replace(
            self,
            total_iters=total_iters,
            pseudo_start_iter=max(1, int(round(self.pseudo_start_iter * f))),
            opacity_reset_interval=(
                int(round(self.opacity_reset_interval * f))
                if self.opacity_reset_interval > 0
                else 0
            ),
            densify_interval=max(1, int(round(self.densify_interval * f))),
            densify_start=max(1, int(round(self.densify_start * f))),
            densify_until=(
                int(round(self.densify_until * f)) if self.densify_until > 0 else 0
            ),
            checkpoint_interval=max(1, int(round(self.checkpoint_interval * f))),
        )


def load_sparse_config(path):
    """Read a SparseConfig from a TOML file (top-level or [sparse] table)."""
    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    with open(path, "rb") as f:
        data = tomllib.load(f)
    table = data.get("sparse", data)
    known = {f.name for f in SparseConfig.__dataclass_fields__.values()}
    kwargs = {k: v for k, v in table.items() if k in known}
    for key in ("background", "pseudo_u"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return SparseConfig(**kwargs)


@dataclass
class Checkpoint:
    iteration: int
    train_psnr: float
    gaussian_count: int
    loss_components: dict

    def to_dict(self):
        return {
            "iteration": self.iteration,
            "train_psnr": self.train_psnr,
            "gaussian_count": self.gaussian_count,
            "loss_components": self.loss_components,
        }


@dataclass
class FitReport:
    checkpoints: list = field(default_factory=list)
    seed: int = 0
    final_count: int = 0

    def to_jsonl(self):
        return "\n".join(json.dumps(c.to_dict()) for c in self.checkpoints) + "\n"


@dataclass
class LossBundle:
    total: float
    components: dict
    grad_color: np.ndarray
    grad_depth: np.ndarray
    pseudo_grad_depths: list


def sparse_loss(render_out, gt_image, gt_depth, pseudo_renders, cfg: SparseConfig, iteration):
    """Composite training loss and its gradient seeds.

    pseudo_renders is a list of (RenderOutput, target_depth) pairs carrying
    depth-only supervision; the pseudo term is gated off before
    cfg.pseudo_start_iter. Returns a LossBundle whose gradients feed
    render_backward for the observed view, plus one depth-gradient raster per
    pseudo view.
    """
    l1_val, l1_g = l1_loss_grad(render_out.color, gt_image)
    ds_val, ds_g = dssim_loss_grad(render_out.color, gt_image)
    grad_color = (1.0 - cfg.lambda1) * l1_g + cfg.lambda1 * ds_g
    grad_depth = np.zeros_like(render_out.depth)
    components = {"l1": l1_val, "dssim": ds_val, "depth": 0.0, "pseudo": 0.0}

    if cfg.lambda_depth > 0:
        if gt_depth is None:
            warnings.warn("lambda_depth > 0 but the view has no estimated depth; term skipped")
        else:
            valid = render_out.alpha > DEPTH_ALPHA_MASK
            res = pcc_depth_loss(render_out.depth, gt_depth, valid=valid)
            components["depth"] = res.loss
            grad_depth = grad_depth + cfg.lambda_depth * res.grad

    pseudo_grads = []
    pseudo_active = cfg.lambda_pseudo > 0 and iteration >= cfg.pseudo_start_iter
    if pseudo_active and pseudo_renders:
        vals = []
        for p_out, p_target in pseudo_renders:
            valid = p_out.alpha > DEPTH_ALPHA_MASK
            res = pcc_depth_loss(p_out.depth, p_target, valid=valid)
            vals.append(res.loss)
            pseudo_grads.append(cfg.lambda_pseudo * res.grad / len(pseudo_renders))
        components["pseudo"] = float(np.mean(vals))
    else:
        pseudo_grads = [np.zeros_like(p.depth) for p, _ in (pseudo_renders or [])]

    total = (
        (1.0 - cfg.lambda1) * l1_val
        + cfg.lambda1 * ds_val
        + cfg.lambda_depth * components["depth"]
        + (cfg.lambda_pseudo * components["pseudo"] if pseudo_active else 0.0)
    )
    return LossBundle(
        total=total,
        components=components,
        grad_color=grad_color,
        grad_depth=grad_depth,
        pseudo_grad_depths=pseudo_grads,
    )


# --------------------------------------------------------------------------
# Optimizer


class Adam:
    """Per-group adaptive moment optimizer over the cloud parameter arrays."""

    BETA1, BETA2, EPS = 0.9, 0.999, 1e-15

    def __init__(self, cloud: GaussianCloud):
        self.m = {k: np.zeros_like(getattr(cloud, k)) for k in GaussianCloud.PARAM_FIELDS}
        self.v = {k: np.zeros_like(getattr(cloud, k)) for k in GaussianCloud.PARAM_FIELDS}
        self.t = 0

    def step(self, cloud, grads, lrs):
        self.t += 1
        b1c = 1.0 - self.BETA1 ** self.t
        b2c = 1.0 - self.BETA2 ** self.t
        for key in GaussianCloud.PARAM_FIELDS:
            lr = lrs[key]
            if lr == 0.0:
                continue
            g = getattr(grads, key)
            m = self.m[key]
            v = self.v[key]
            m *= self.BETA1
            m += (1.0 - self.BETA1) * g
            v *= self.BETA2
            v += (1.0 - self.BETA2) * g * g
            update = lr * (m / b1c) / (np.sqrt(v / b2c) + self.EPS)
            getattr(cloud, key).__isub__(update)

    def remap(self, keep_idx, n_new):
        for key in GaussianCloud.PARAM_FIELDS:
            kept_m = self.m[key][keep_idx]
            kept_v = self.v[key][keep_idx]
            pad = (n_new,) + kept_m.shape[1:]
            self.m[key] = np.concatenate([kept_m, np.zeros(pad)])
            self.v[key] = np.concatenate([kept_v, np.zeros(pad)])

    def reset_group(self, key):
        self.m[key][:] = 0.0
        self.v[key][:] = 0.0


def means_lr(cfg: SparseConfig, extent, iteration):
    """Exponential (log-linear) decay of the position learning rate."""
    if cfg.lr_means == 0.0:
        return 0.0
    frac = min(max(iteration / cfg.total_iters, 0.0), 1.0)
    lr = cfg.lr_means * (cfg.lr_means_final / cfg.lr_means) ** frac
    return lr * extent


def lr_table(cfg: SparseConfig, extent, iteration):
    return {
        "means": means_lr(cfg, extent, iteration),
        "colors": cfg.lr_colors,
        "opacity_logits": cfg.lr_opacities,
        "log_scales": cfg.lr_scales,
        "rotations": cfg.lr_rotations,
    }


# --------------------------------------------------------------------------
# Adaptive density control


def reset_opacity(cloud: GaussianCloud, cap=0.01):
    """Clamp every opacity down to cap; idempotent."""
    if not (0.0 < cap < 1.0):
        raise ValueError(f"cap must be in (0,1), got {cap}")
    out = cloud.copy()
    out.opacity_logits = np.minimum(out.opacity_logits, float(logit(cap)))
    return out


def _densify_and_prune(cloud, grad_norms, cfg: SparseConfig, scene_extent, rng):
    """Returns (cloud', keep_idx, n_appended); keep_idx indexes surviving rows."""
    g = len(cloud)
    grad_norms = np.asarray(grad_norms).reshape(g)
    scales = cloud.scales
    max_scale = scales.max(axis=1)
    opacities = cloud.opacities

    prune = (opacities < cfg.prune_opacity) | (max_scale > 0.1 * scene_extent)
    over = (grad_norms > cfg.tau_pos) & ~prune
    if cfg.max_gaussians > 0 and g >= cfg.max_gaussians:
        over[:] = False  # at capacity: prune only
    small = max_scale <= cfg.percent_dense * scene_extent
    clone = over & small
    split = over & ~small

    keep_idx = np.nonzero(~prune & ~split)[0]
    pieces = [cloud.select(keep_idx)]
    n_new = 0

    if clone.any():
        clones = cloud.select(np.nonzero(clone)[0])
        pieces.append(clones)
        n_new += len(clones)

    split_idx = np.nonzero(split)[0]
    if split_idx.size:
        parents = cloud.select(split_idx)
        from . import quats as _quats

        R = _quats.to_rotmat_batch(parents.unit_quaternions)
        child_means = []
        for _ in range(2):
            local = rng.normal(size=(split_idx.size, 3)) * parents.scales
            child_means.append(parents.means + np.einsum("nij,nj->ni", R, local))
        children = GaussianCloud(
            means=np.concatenate(child_means),
            log_scales=np.tile(parents.log_scales - np.log(1.6), (2, 1)),
            rotations=np.tile(parents.rotations, (2, 1)),
            opacity_logits=np.tile(parents.opacity_logits, 2),
            colors=np.tile(parents.colors, (2, 1)),
        )
        pieces.append(children)
        n_new += len(children)

    out = GaussianCloud.concatenate(pieces) if len(pieces) > 1 else pieces[0].copy()
    if len(out) == 0:
        raise EmptyCloud("densify/prune removed every Gaussian")
    return out, keep_idx, n_new


def densify_and_prune(cloud, positional_grad_norms, cfg: SparseConfig, scene_extent, seed=0):
    """Clone small / split large over-threshold Gaussians, drop weak or huge ones."""
    rng = np.random.default_rng(seed)
    out, _, _ = _densify_and_prune(cloud, positional_grad_norms, cfg, scene_extent, rng)
    return out


# --------------------------------------------------------------------------
# Fitting


def _nearest_view(scene, i):
    best, best_d = None, np.inf
    for j in range(len(scene)):
        if j == i:
            continue
        d = geodesic_distance(scene.poses[i], scene.poses[j])
        if d < best_d:
            best, best_d = j, d
    return best


def _make_pseudo_views(scene, rng, u_range):
    """One interpolated pose per observed view, towards its closest neighbor.

    The depth target of a pseudo view is the estimated depth of its source
    view (nearest-pose assignment)."""
    out = []
    if len(scene) < 2 or scene.depths is None:
        return out
    for i in range(len(scene)):
        if scene.depths[i] is None:
            continue
        j = _nearest_view(scene, i)
        u = rng.uniform(*u_range)
        pose = interpolate_pseudo_view(scene.poses[i], scene.poses[j], u)
        out.append((pose, scene.depths[i]))
    return out


def train_psnr(cloud, scene, background):
    vals = []
    for pose, img in zip(scene.poses, scene.images):
        out = render(cloud, pose, background)
        vals.append(psnr(out.color, img))
    return float(np.mean(vals))


def fit_sparse_3dgs(scene, cfg: SparseConfig, seed=0, initial_cloud=None):
    """Optimize a Gaussian cloud against the scene's views; deterministic per seed."""
    extent = camera_extent(scene.poses)
    if initial_cloud is None:
        if len(scene.point_cloud) == 0:
            raise InitializationError("scene has an empty point cloud")
        cloud = init_from_point_cloud(scene.point_cloud)
        # a very sparse point cloud gives huge neighbor distances; keep the
        # seeded blobs inside the world-radius prune limit
        np.minimum(cloud.log_scales, np.log(0.09 * extent), out=cloud.log_scales)
    else:
        cloud = initial_cloud.copy()
    rng = np.random.default_rng(seed)
    adam = Adam(cloud)
    report = FitReport(seed=seed)
    bg = cfg.background

    use_pseudo = cfg.lambda_pseudo > 0 and scene.depths is not None and len(scene) >= 2
    pseudo_views = _make_pseudo_views(scene, rng, cfg.pseudo_u) if use_pseudo else []

    grad_accum = np.zeros(len(cloud))
    seen_count = np.zeros(len(cloud))

    for it in range(1, cfg.total_iters + 1):
        vi = int(rng.integers(len(scene)))
        pose = scene.poses[vi]
        out, aux = render_with_aux(cloud, pose, bg)

        pseudo_batch = []
        p_aux = None
        if use_pseudo and pseudo_views and it >= cfg.pseudo_start_iter:
            p_pose, p_target = pseudo_views[int(rng.integers(len(pseudo_views)))]
            p_out, p_aux = render_with_aux(cloud, p_pose, bg)
            pseudo_batch = [(p_out, p_target)]

        bundle = sparse_loss(out, scene.images[vi], scene.depth_for(vi), pseudo_batch, cfg, it)
        grads = render_backward(cloud, pose, bg, bundle.grad_color, bundle.grad_depth, aux=aux)

        if pseudo_batch and np.any(bundle.pseudo_grad_depths[0]):
            pg = render_backward(
                cloud,
                p_pose,
                bg,
                np.zeros_like(out.color),
                bundle.pseudo_grad_depths[0],
                aux=p_aux,
            )
            for key in GaussianCloud.PARAM_FIELDS:
                getattr(grads, key).__iadd__(getattr(pg, key))
            grads.screen_grad_norms = grads.screen_grad_norms + pg.screen_grad_norms
            grads.visible |= pg.visible

        adam.step(cloud, grads, lr_table(cfg, extent, it))
        np.clip(cloud.colors, 0.0, 1.0, out=cloud.colors)

        grad_accum += grads.screen_grad_norms
        seen_count += grads.visible

        in_window = cfg.densify_start <= it <= cfg.densify_end
        if cfg.densify_interval > 0 and in_window and it % cfg.densify_interval == 0:
            mean_grad = grad_accum / np.maximum(seen_count, 1.0)
            cloud, keep_idx, n_new = _densify_and_prune(cloud, mean_grad, cfg, extent, rng)
            adam.remap(keep_idx, n_new)
            grad_accum = np.zeros(len(cloud))
            seen_count = np.zeros(len(cloud))
            if use_pseudo:
                pseudo_views = _make_pseudo_views(scene, rng, cfg.pseudo_u)

        if (
            cfg.opacity_reset_interval > 0
            and it <= cfg.densify_end  # resets accompany densification only
            and it % cfg.opacity_reset_interval == 0
        ):
            cloud = reset_opacity(cloud, cfg.opacity_reset_cap)
            adam.reset_group("opacity_logits")

        if it % cfg.checkpoint_interval == 0 or it == cfg.total_iters:
            report.checkpoints.append(
                Checkpoint(
                    iteration=it,
                    train_psnr=train_psnr(cloud, scene, bg),
                    gaussian_count=len(cloud),
                    loss_components=dict(bundle.components),
                )
            )

    report.final_count = len(cloud)
    return cloud, report
