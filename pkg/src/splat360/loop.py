"""Autoregressive view fusion: enhance novel renders and fold them back in.

Starting from a cloud fitted to the observed views, each schedule step picks
the m unfused poses closest to the current training stack, renders them,
sends each render through the two-stage enhancer (in-paint, then artifact
removal), appends the results as pseudo ground truth, shrinks Gaussian
scales by eta, and optimizes for the step's iteration count. Observed views
keep the photometric objective; generated views use the decaying sample
loss. Also hosts the artifact-pair dataset engine and its rectangle-mask
generator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cameras import (
    GeodesicConfig,
    camera_extent,
    geodesic_distance,
    interpolate_pseudo_view,
    perturb_camera,
)
from .enhance import EnhanceRequest, make_client, to_uint8
from .errors import (
    EmptyInstructionPool,
    InvalidEta,
    PoolExhausted,
    ProtocolViolation,
)
from .gaussians import GaussianCloud
from .losses import photometric_loss_grad, sample_loss
from .optim import Adam, SparseConfig, _densify_and_prune, lr_table, reset_opacity
from .render import opacity_mask, render, render_backward, render_with_aux
from .scene_io import save_raster
from .schedule import solve_schedule

INPAINT_PROMPT = "A photo of [V]"
CLEAN_PROMPT = "Denoise the noisy image and remove all floaters and Gaussian artifacts."


def _iterative_preset():
    return SparseConfig(
        lambda_depth=0.0,
        lambda_pseudo=0.0,
        tau_pos=0.0002,
        opacity_reset_interval=3000,
        total_iters=30000,
    )


@dataclass
class LoopConfig:
    total_iters: int = 30000
    m: int = 2
    kind: str = "quadratic"
    eta: float = 0.97
    sample_weight_start: float = 1.0
    sample_weight_end: float = 0.1
    tau: float = 0.8
    enhancer: str = "stub:identity"
    steps: int = 20
    image_guidance: float = 2.5
    text_guidance: float = 7.0
    inpaint_tmin: tuple = (0.98, 0.90)
    clean_tmin: tuple = (0.98, 0.70)
    t_max: float = 0.99
    n1_hint: float | None = None
    optim: SparseConfig = field(default_factory=_iterative_preset)

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise InvalidEta(f"eta must lie in (0,1], got {self.eta}")
        if self.m < 1:
            raise ValueError("m must be >= 1")


def load_loop_config(path):
    """Read a LoopConfig from a TOML file ([loop] table plus optional [optim])."""
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as f:
        data = tomllib.load(f)
    table = dict(data.get("loop", data))
    optim_table = table.pop("optim", data.get("optim", None))
    known = {f.name for f in LoopConfig.__dataclass_fields__.values()} - {"optim"}
    kwargs = {k: v for k, v in table.items() if k in known}
    for key in ("inpaint_tmin", "clean_tmin"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    cfg = LoopConfig(**kwargs)
    if optim_table:
        base = _iterative_preset()
        for k, v in optim_table.items():
            if hasattr(base, k):
                setattr(base, k, tuple(v) if k == "background" else v)
        cfg.optim = base
    return cfg


def shrink_scales(cloud: GaussianCloud, eta):
    """Multiply every axis scale by eta (log-scales shifted by ln eta)."""
    if not (0.0 < eta <= 1.0):
        raise InvalidEta(f"eta must lie in (0,1], got {eta}")
    out = cloud.copy()
    out.log_scales = out.log_scales + np.log(eta)
    return out


def next_novel_camera(pool, stack, m, cfg: GeodesicConfig = GeodesicConfig()):
    """Pop the m pool poses nearest (min geodesic distance) to the stack.

    Mutates pool. Ties break on the string form of the view id so the choice
    is independent of pool ordering.
    """
    if not pool:
        raise PoolExhausted("no unfused poses remain")
    scored = []
    for p in pool:
        d = min(geodesic_distance(p, s, cfg) for s in stack) if stack else 0.0
        scored.append((d, str(p.id), p))
    scored.sort(key=lambda t: (t[0], t[1]))
    chosen = [t[2] for t in scored[: min(m, len(pool))]]
    for p in chosen:
        pool.remove(p)
    return chosen


def _lerp(lo_hi, frac):
    lo, hi = lo_hi
    return lo + (hi - lo) * frac


def enhance_view(client, render_out, cfg: LoopConfig, step_frac=0.0):
    """Two-stage enhancement of a novel render: in-paint, then clean.

    Returns the enhanced image as a float raster in [0,1] with the render's
    dimensions. step_frac in [0,1] positions the t_min schedules.
    """
    mask = opacity_mask(render_out.alpha, cfg.tau)
    image = to_uint8(render_out.color)
    inpaint = EnhanceRequest(
        stage="inpaint",
        image=image,
        mask=mask,
        prompt=INPAINT_PROMPT,
        steps=cfg.steps,
        t_min=_lerp(cfg.inpaint_tmin, step_frac),
        t_max=cfg.t_max,
    )
    r1 = client.call(inpaint)
    clean = EnhanceRequest(
        stage="clean",
        image=r1.image,
        prompt=CLEAN_PROMPT,
        steps=cfg.steps,
        image_guidance=cfg.image_guidance,
        text_guidance=cfg.text_guidance,
        t_min=_lerp(cfg.clean_tmin, step_frac),
        t_max=cfg.t_max,
    )
    r2 = client.call(clean)
    if r2.image.shape[:2] != image.shape[:2]:
        raise ProtocolViolation("enhanced image dimensions drifted")
    return r2.image.astype(np.float64) / 255.0


@dataclass
class FusionStep:
    k: int
    iterations: int
    added_ids: list
    mask_areas: list  # fraction of to-inpaint pixels per added view
    stack_size: int
    sample_weight: float


@dataclass
class FusionReport:
    steps: list = field(default_factory=list)
    schedule: dict = field(default_factory=dict)
    seed: int = 0
    final_count: int = 0

    def to_dict(self):
        return {
            "schedule": self.schedule,
            "seed": self.seed,
            "final_count": self.final_count,
            "steps": [vars(s) for s in self.steps],
        }


def run_sp2360(scene, novel_pose_pool, cfg: LoopConfig, enhancer=None, initial_cloud=None, seed=0):
    """Fuse enhanced novel views into the cloud following the solved schedule.

    The observed scene is never mutated; the training stack only grows. When
    no initial cloud is given, one is fitted with the sparse preset first.
    """
    from .optim import fit_sparse_3dgs

    client = enhancer if enhancer is not None else make_client(cfg.enhancer)
    if initial_cloud is None:
        initial_cloud, _ = fit_sparse_3dgs(scene, SparseConfig.sparse_preset(), seed=seed)
    cloud = initial_cloud.copy()
    report = FusionReport(seed=seed)
    pool = list(novel_pose_pool)
    if not pool:
        report.final_count = len(cloud)
        return cloud, report

    sched = solve_schedule(cfg.total_iters, len(pool), cfg.m, cfg.kind, cfg.n1_hint)
    report.schedule = sched.to_dict()
    ocfg = cfg.optim
    bg = ocfg.background
    extent = camera_extent(list(scene.poses) + pool)
    rng = np.random.default_rng(seed)
    adam = Adam(cloud)

    stack = [
        {"pose": p, "image": img, "generated": False}
        for p, img in zip(scene.poses, scene.images)
    ]
    grad_accum = np.zeros(len(cloud))
    seen_count = np.zeros(len(cloud))
    global_it = 0
    k_total = len(sched)

    for k, n_k in enumerate(sched.counts, start=1):
        step_frac = (k - 1) / max(k_total - 1, 1)
        chosen = next_novel_camera(pool, [e["pose"] for e in stack], cfg.m)
        mask_areas = []
        for pose in chosen:
            out = render(cloud, pose, bg)
            mask_areas.append(float(opacity_mask(out.alpha, cfg.tau).mean()))
            pseudo_gt = enhance_view(client, out, cfg, step_frac)
            stack.append({"pose": pose, "image": pseudo_gt, "generated": True})

        cloud = shrink_scales(cloud, cfg.eta)

        w_now = 0.0
        for _ in range(n_k):
            global_it += 1
            entry = stack[int(rng.integers(len(stack)))]
            out, aux = render_with_aux(cloud, entry["pose"], bg)
            if entry["generated"]:
                frac = global_it / cfg.total_iters
                w_now = cfg.sample_weight_start + (
                    cfg.sample_weight_end - cfg.sample_weight_start
                ) * min(frac, 1.0)
                _, grad_color = sample_loss(out.color, entry["image"], w_now)
            else:
                _, grad_color, _, _ = photometric_loss_grad(
                    out.color, entry["image"], ocfg.lambda1
                )
            grads = render_backward(
                cloud, entry["pose"], bg, grad_color, np.zeros_like(out.depth), aux=aux
            )
            adam.step(cloud, grads, lr_table(ocfg, extent, global_it))
            np.clip(cloud.colors, 0.0, 1.0, out=cloud.colors)
            grad_accum += grads.screen_grad_norms
            seen_count += grads.visible

            in_window = ocfg.densify_start <= global_it <= ocfg.densify_end
            if (
                ocfg.densify_interval > 0
                and in_window
                and global_it % ocfg.densify_interval == 0
            ):
                mean_grad = grad_accum / np.maximum(seen_count, 1.0)
                cloud, keep_idx, n_new = _densify_and_prune(
                    cloud, mean_grad, ocfg, extent, rng
                )
                adam.remap(keep_idx, n_new)
                grad_accum = np.zeros(len(cloud))
                seen_count = np.zeros(len(cloud))

            if (
                ocfg.opacity_reset_interval > 0
                and global_it <= ocfg.densify_end
                and global_it % ocfg.opacity_reset_interval == 0
            ):
                cloud = reset_opacity(cloud, ocfg.opacity_reset_cap)
                adam.reset_group("opacity_logits")

        report.steps.append(
            FusionStep(
                k=k,
                iterations=n_k,
                added_ids=[p.id for p in chosen],
                mask_areas=mask_areas,
                stack_size=len(stack),
                sample_weight=w_now,
            )
        )

    report.final_count = len(cloud)
    return cloud, report


# --------------------------------------------------------------------------
# Artifact-pair dataset engine


def load_instruction_pool(path):
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    return [ln for ln in lines if ln]


def random_rect_masks(width, height, count, mode="union", seed=0):
    """Union (or its complement) of random rectangles covering 5-40% each."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if mode not in ("union", "complement"):
        raise ValueError(f"mode must be 'union' or 'complement', got {mode!r}")
    rng = np.random.default_rng(seed)
    mask = np.zeros((height, width), dtype=np.uint8)
    area = width * height
    for _ in range(count):
        while True:
            x0, x1 = sorted(int(v) for v in rng.integers(0, width + 1, size=2))
            y0, y1 = sorted(int(v) for v in rng.integers(0, height + 1, size=2))
            frac = (x1 - x0) * (y1 - y0) / area
            if 0.05 <= frac <= 0.40:
                break
        mask[y0:y1, x0:x1] = 1
    if mode == "complement":
        mask = 1 - mask
    return mask


def generate_artifact_pairs(
    dense_cloud,
    sparse_clouds,
    cameras,
    interp_count,
    perturb_sigmas,
    instruction_pool,
    seed,
    out_dir,
    background=(0.0, 0.0, 0.0),
):
    """Write (clean, artifact, instruction) training triplets to out_dir.

    For every source camera plus interp_count derived cameras (interpolated
    towards a random partner, then perturbed), the dense cloud renders the
    clean image and each sparse cloud renders an artifact image. Returns the
    manifest: one dict per triplet, also written as JSON lines.
    """
    if not instruction_pool:
        raise EmptyInstructionPool("instruction pool must contain at least one entry")
    out_dir = Path(out_dir)
    (out_dir / "clean").mkdir(parents=True, exist_ok=True)
    for m_views in sparse_clouds:
        (out_dir / f"artifact_M{m_views}").mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    rot_sigma, trans_sigma = perturb_sigmas
    manifest = []
    for cam in cameras:
        derived = [cam]
        for j in range(interp_count):
            if len(cameras) > 1:
                partner = cameras[int(rng.integers(len(cameras)))]
                while partner.id == cam.id:
                    partner = cameras[int(rng.integers(len(cameras)))]
                u = float(rng.uniform(0.2, 0.8))
                pose = interpolate_pseudo_view(cam, partner, u)
            else:
                pose = cam
            pose = perturb_camera(pose, rot_sigma, trans_sigma, seed=int(rng.integers(2 ** 31)))
            derived.append(pose)

        for view_idx, pose in enumerate(derived):
            tag = f"{cam.id}_{view_idx}"
            clean_path = out_dir / "clean" / f"{tag}.png"
            save_raster(clean_path, render(dense_cloud, pose, background).color)
            for m_views, s_cloud in sorted(sparse_clouds.items()):
                art_path = out_dir / f"artifact_M{m_views}" / f"{tag}.png"
                save_raster(art_path, render(s_cloud, pose, background).color)
                instruction = instruction_pool[int(rng.integers(len(instruction_pool)))]
                manifest.append(
                    {
                        "clean": str(clean_path),
                        "artifact": str(art_path),
                        "instruction": instruction,
                        "m": m_views,
                        "camera_id": str(cam.id),
                        "derived_index": view_idx,
                    }
                )

    with open(out_dir / "manifest.jsonl", "w", encoding="utf-8") as f:
        for row in manifest:
            f.write(json.dumps(row) + "\n")
    return manifest
