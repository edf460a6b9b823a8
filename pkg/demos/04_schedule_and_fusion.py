"""Iteration schedules and the autoregressive view-fusion loop.

Solves the four schedule kinds for one budget, then runs a miniature fusion:
novel renders pass through the two-stage enhancement client (identity stub
here) and return as pseudo ground truth for incremental optimization, with
scales shrunk by eta after every added view pair.
"""

import numpy as np

from splat360 import LoopConfig, fit_sparse_3dgs, run_sp2360, solve_schedule
from splat360.enhance import InProcessStubClient
from splat360.metrics import evaluate_views
from splat360.optim import SparseConfig
from splat360.synthetic import make_ring_scene, subset_scene

for kind in ("constant", "linear", "quadratic", "cosine"):
    sched = solve_schedule(3000, 12, 2, kind)
    print(f"{kind:>9}: {list(sched.counts)}  (sum {sched.total}, growth {sched.growth:.3f})")

scene, _ = make_ring_scene(n_gaussians=14, n_views=12, image_size=48, seed=2)
observed = subset_scene(scene, [0, 4, 8])
pool = [scene.poses[i] for i in range(12) if i % 4 != 0]

base_cfg = SparseConfig.sparse_preset(
    total_iters=300, pseudo_start_iter=100, densify_start=80, densify_interval=80,
    densify_until=240, checkpoint_interval=300, max_gaussians=250,
)
cloud, _ = fit_sparse_3dgs(observed, base_cfg, seed=0)

cfg = LoopConfig(total_iters=400, m=2, kind="quadratic", eta=0.97)
cfg.optim.total_iters = 400
cfg.optim.densify_start = 100
cfg.optim.densify_interval = 100
cfg.optim.densify_until = 300
cfg.optim.max_gaussians = 300

fused, report = run_sp2360(
    observed, pool, cfg, enhancer=InProcessStubClient("stub-identity"),
    initial_cloud=cloud, seed=0,
)
print("schedule used:", report.schedule["counts"])
for step in report.steps:
    print(
        f"step {step.k}: +views {step.added_ids}, {step.iterations} iters, "
        f"mask area {np.round(step.mask_areas, 3)}, stack {step.stack_size}"
    )

held = [i for i in range(12) if i % 4 != 0]
before = evaluate_views(cloud, [scene.poses[i] for i in held], [scene.images[i] for i in held])
after = evaluate_views(fused, [scene.poses[i] for i in held], [scene.images[i] for i in held])
print(f"heldout PSNR before fusion {before.mean_psnr:.2f} dB -> after {after.mean_psnr:.2f} dB")
