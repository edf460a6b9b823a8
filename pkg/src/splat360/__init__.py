"""Sparse-view 360-degree reconstruction with 3D Gaussian splatting."""

__version__ = "0.1.0"

from .scene_io import (
    CameraPose,
    Intrinsics,
    Scene,
    SparsePointCloud,
    load_colmap_scene,
    load_raster,
    save_raster,
    train_test_split,
)
from .cameras import (
    GeodesicConfig,
    SubsetResult,
    geodesic_distance,
    greedy_subset,
    interpolate_pseudo_view,
    perturb_camera,
    rodrigues_angle,
    select_view_subset,
    slerp,
    spline_translation,
)
from .gaussians import GaussianCloud, init_from_point_cloud
from .render import RenderOutput, opacity_mask, project_gaussian, render, render_backward
from .losses import dssim_loss, l1_loss, pcc_depth_loss, sample_loss, ssim
from .optim import FitReport, SparseConfig, densify_and_prune, fit_sparse_3dgs, reset_opacity, sparse_loss
from .schedule import Schedule, solve_schedule
from .loop import (
    LoopConfig,
    enhance_view,
    generate_artifact_pairs,
    next_novel_camera,
    random_rect_masks,
    run_sp2360,
    shrink_scales,
)
from .enhance import EnhanceRequest, EnhanceResponse, HttpEnhancerClient, InProcessStubClient, make_client
from .metrics import EvalReport, evaluate_views, psnr
from .synthetic import make_ring_scene, ring_poses, subset_scene
