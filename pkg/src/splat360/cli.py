"""Command-line entry points.

Every subcommand reads optional TOML configuration plus flags, accepts
--seed, writes its outputs plus a JSON run summary, and exits 0 on success,
1 on a runtime error, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cameras import GeodesicConfig, select_view_subset
from .enhance import make_client
from .errors import Splat360Error
from .gaussians import GaussianCloud
from .loop import LoopConfig, generate_artifact_pairs, load_instruction_pool, load_loop_config, run_sp2360
from .metrics import evaluate_pairs
from .optim import SparseConfig, fit_sparse_3dgs, load_sparse_config
from .render import opacity_mask, render
from .scene_io import Scene, load_colmap_scene, load_raster, save_mask, save_raster
from .schedule import solve_schedule

MAX_SIDE_DEFAULT = 128  # fit-sparse working-resolution cap


def _write_summary(out_dir, name, payload):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}_summary.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _downscale(image, max_side):
    h, w = image.shape[:2]
    side = max(h, w)
    if side <= max_side:
        return image
    step = int(np.ceil(side / max_side))
    return image[::step, ::step]


def _downscale_scene(scene, max_side):
    from .scene_io import CameraPose, Intrinsics

    poses, images, depths = [], [], []
    for i, (pose, img) in enumerate(zip(scene.poses, scene.images)):
        small = _downscale(img, max_side)
        sy = small.shape[0] / img.shape[0]
        sx = small.shape[1] / img.shape[1]
        intr = pose.intrinsics
        new_intr = Intrinsics(
            fx=intr.fx * sx,
            fy=intr.fy * sy,
            cx=intr.cx * sx,
            cy=intr.cy * sy,
            width=small.shape[1],
            height=small.shape[0],
        )
        poses.append(
            CameraPose(
                intrinsics=new_intr,
                rotation=pose.rotation,
                translation=pose.translation,
                id=pose.id,
            )
        )
        images.append(small)
        if scene.depths is not None:
            d = scene.depths[i]
            depths.append(_downscale(d, max_side) if d is not None else None)
    return Scene(
        poses=tuple(poses),
        images=tuple(images),
        point_cloud=scene.point_cloud,
        depths=tuple(depths) if scene.depths is not None else None,
    )


def _load_scene(args):
    scene = load_colmap_scene(args.model_dir, args.images_dir, getattr(args, "depths_dir", None))
    cap = getattr(args, "max_side", MAX_SIDE_DEFAULT)
    return _downscale_scene(scene, cap)


# --- subcommands ---


def cmd_solve_schedule(args):
    sched = solve_schedule(args.total, args.views, args.m, args.kind, args.n1)
    print(json.dumps(sched.to_dict()))
    if args.out:
        _write_summary(args.out, "solve_schedule", sched.to_dict())
    return 0


def cmd_select_views(args):
    scene = _load_scene(args)
    result = select_view_subset(scene.poses, args.M, GeodesicConfig(w_t=args.w_t))
    print(result.to_json())
    if args.out:
        _write_summary(args.out, "select_views", result.to_dict())
    return 0


def cmd_fit_sparse(args):
    scene = _load_scene(args)
    cfg = load_sparse_config(args.config) if args.config else SparseConfig.sparse_preset()
    if args.iters:
        cfg = cfg.scaled(args.iters)
    cloud, report = fit_sparse_3dgs(scene, cfg, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cloud.save(out / "cloud.gcld")
    (out / "fit_report.jsonl").write_text(report.to_jsonl())
    _write_summary(
        out,
        "fit_sparse",
        {
            "seed": args.seed,
            "views": len(scene),
            "gaussians": len(cloud),
            "final_train_psnr": report.checkpoints[-1].train_psnr if report.checkpoints else None,
        },
    )
    return 0


def cmd_render(args):
    scene = _load_scene(args)
    cloud = GaussianCloud.load(args.cloud)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rendered = []
    for pose in scene.poses:
        r = render(cloud, pose)
        stem = f"view_{pose.id}"
        save_raster(out / f"{stem}.png", r.color)
        if args.depth:
            save_raster(out / f"{stem}_depth.fras", r.depth)
        rendered.append(str(out / f"{stem}.png"))
    _write_summary(out, "render", {"count": len(rendered), "files": rendered})
    return 0


def cmd_export_masks(args):
    scene = _load_scene(args)
    cloud = GaussianCloud.load(args.cloud)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    areas = {}
    for pose in scene.poses:
        r = render(cloud, pose)
        mask = opacity_mask(r.alpha, args.tau)
        save_mask(out / f"mask_{pose.id}.png", mask)
        areas[str(pose.id)] = float(mask.mean())
    _write_summary(out, "export_masks", {"tau": args.tau, "mask_area": areas})
    return 0


def cmd_iterate(args):
    scene = _load_scene(args)
    cfg = load_loop_config(args.config) if args.config else LoopConfig()
    if args.iters:
        cfg.total_iters = args.iters
        cfg.optim = cfg.optim.scaled(args.iters)
    if args.enhancer:
        cfg.enhancer = args.enhancer
    cloud = GaussianCloud.load(args.cloud) if args.cloud else None
    pool_scene = load_colmap_scene(args.pool_model_dir, args.images_dir) if args.pool_model_dir else None
    pool = list(pool_scene.poses) if pool_scene else []
    client = make_client(cfg.enhancer)
    final, report = run_sp2360(
        scene, pool, cfg, enhancer=client, initial_cloud=cloud, seed=args.seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    final.save(out / "fused.gcld")
    _write_summary(out, "iterate", report.to_dict())
    return 0


def cmd_gen_artifact_data(args):
    scene = _load_scene(args)
    dense = GaussianCloud.load(args.dense_cloud)
    sparse = {}
    for spec_item in args.sparse_cloud:
        m_str, path = spec_item.split("=", 1)
        sparse[int(m_str)] = GaussianCloud.load(path)
    pool = load_instruction_pool(args.instructions)
    manifest = generate_artifact_pairs(
        dense,
        sparse,
        list(scene.poses),
        args.interp_count,
        (args.rot_sigma, args.trans_sigma),
        pool,
        args.seed,
        args.out,
    )
    _write_summary(args.out, "gen_artifact_data", {"triplets": len(manifest)})
    return 0


def cmd_eval(args):
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    names = sorted(p.name for p in pred_dir.glob("*.png"))
    pairs, ids = [], []
    for name in names:
        gt_path = gt_dir / name
        if not gt_path.is_file():
            continue
        pairs.append((load_raster(pred_dir / name), load_raster(gt_path)))
        ids.append(name)
    if not pairs:
        raise Splat360Error("no overlapping .png files between pred and gt directories")
    report = evaluate_pairs(pairs, ids)
    print(report.to_json())
    if args.out:
        _write_summary(args.out, "eval", report.to_dict())
    return 0


def _add_scene_args(p, images_required=True):
    p.add_argument("--model-dir", required=True, help="COLMAP text model directory")
    p.add_argument("--images-dir", required=images_required)
    p.add_argument("--depths-dir", default=None)
    p.add_argument("--max-side", type=int, default=MAX_SIDE_DEFAULT)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="splat360",
        description="Sparse-view 360 reconstruction with Gaussian splatting",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-schedule", help="solve per-step iteration counts")
    p.add_argument("--total", type=int, required=True)
    p.add_argument("--views", type=int, required=True)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--kind", choices=("constant", "linear", "quadratic", "cosine"), default="quadratic")
    p.add_argument("--n1", type=float, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_solve_schedule)

    p = sub.add_parser("select-views", help="choose an M-view subset")
    _add_scene_args(p)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--w-t", type=float, default=0.1)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_select_views)

    p = sub.add_parser("fit-sparse", help="fit the regularized sparse baseline")
    _add_scene_args(p)
    p.add_argument("--config", default=None, help="TOML config")
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fit_sparse)

    p = sub.add_parser("render", help="render a saved cloud at scene poses")
    _add_scene_args(p)
    p.add_argument("--cloud", required=True)
    p.add_argument("--depth", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("export-masks", help="export opacity masks at tau")
    _add_scene_args(p)
    p.add_argument("--cloud", required=True)
    p.add_argument("--tau", type=float, default=0.8)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_export_masks)

    p = sub.add_parser("iterate", help="run the fusion loop")
    _add_scene_args(p)
    p.add_argument("--cloud", default=None, help="initial cloud (.gcld)")
    p.add_argument("--pool-model-dir", default=None, help="COLMAP model holding novel poses")
    p.add_argument("--config", default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--enhancer", default=None, help="stub:identity | stub:blur | http://...")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_iterate)

    p = sub.add_parser("gen-artifact-data", help="emit clean/artifact training triplets")
    _add_scene_args(p)
    p.add_argument("--dense-cloud", required=True)
    p.add_argument("--sparse-cloud", action="append", required=True, metavar="M=path.gcld")
    p.add_argument("--instructions", required=True)
    p.add_argument("--interp-count", type=int, default=1)
    p.add_argument("--rot-sigma", type=float, default=0.05)
    p.add_argument("--trans-sigma", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_artifact_data)

    p = sub.add_parser("eval", help="PSNR/SSIM between two image directories")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        return args.func(args)
    except Splat360Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
