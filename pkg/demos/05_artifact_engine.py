"""The artifact-pair dataset engine and rectangle-mask generator.

Fits a dense model and a few-view model to the same synthetic scene, then
emits (clean, artifact, instruction) triplets over source and derived
cameras. Also shows the random-rectangle masks used to make in-painting
training targets.
"""

from pathlib import Path

import numpy as np

from splat360 import fit_sparse_3dgs, generate_artifact_pairs, random_rect_masks
from splat360.loop import load_instruction_pool
from splat360.optim import SparseConfig
from splat360.scene_io import save_mask
from splat360.synthetic import make_ring_scene, subset_scene

out_dir = Path(__file__).parent / "out" / "artifact_data"
data_dir = Path(__file__).parent / "data"

scene, gt_cloud = make_ring_scene(n_gaussians=14, n_views=12, image_size=48, seed=6)

# dense fit on everything vs a quick 3-view fit: the quality gap between the
# two renders of the same pose is the training signal for artifact removal
fit_cfg = SparseConfig.dense_preset(
    total_iters=250, densify_start=80, densify_interval=80, densify_until=200,
    opacity_reset_interval=0, checkpoint_interval=250, max_gaussians=250,
)
dense_cloud, _ = fit_sparse_3dgs(scene, fit_cfg, seed=0)
sparse_scene = subset_scene(scene, [0, 4, 8])
sparse_cfg = SparseConfig.sparse_preset(
    total_iters=120, pseudo_start_iter=60, densify_interval=0,
    checkpoint_interval=120, opacity_reset_interval=0,
)
sparse_cloud, _ = fit_sparse_3dgs(sparse_scene, sparse_cfg, seed=0)

instructions = load_instruction_pool(data_dir / "instructions.txt")
manifest = generate_artifact_pairs(
    dense_cloud,
    {3: sparse_cloud},
    list(scene.poses[:4]),
    interp_count=1,
    perturb_sigmas=(0.03, 0.05),
    instruction_pool=instructions,
    seed=0,
    out_dir=out_dir,
)
print(f"wrote {len(manifest)} triplets under {out_dir}")
print("sample row:", manifest[0])

# rectangle masks: union and complement modes share the same rectangles
union = random_rect_masks(96, 72, count=3, mode="union", seed=5)
comp = random_rect_masks(96, 72, count=3, mode="complement", seed=5)
save_mask(out_dir / "mask_union.png", union)
save_mask(out_dir / "mask_complement.png", comp)
print("union covers", round(float(union.mean()), 3), "of the frame;",
      "complement covers", round(float(comp.mean()), 3))
assert np.array_equal(comp, 1 - union)
