"""PSNR/SSIM evaluation harness."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .losses import ssim

PSNR_CAP_DB = 99.0


def psnr(a, b, cap=PSNR_CAP_DB):
    """Peak signal-to-noise ratio in dB for rasters in [0,1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"raster shapes differ: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return cap
    return float(10.0 * np.log10(1.0 / mse))


@dataclass
class EvalReport:
    view_ids: list = field(default_factory=list)
    psnr_values: list = field(default_factory=list)
    ssim_values: list = field(default_factory=list)

    def add(self, view_id, psnr_db, ssim_val):
        self.view_ids.append(view_id)
        self.psnr_values.append(float(psnr_db))
        self.ssim_values.append(float(ssim_val))

    @property
    def mean_psnr(self):
        return float(np.mean(self.psnr_values))

    @property
    def median_psnr(self):
        return float(np.median(self.psnr_values))

    @property
    def mean_ssim(self):
        return float(np.mean(self.ssim_values))

    @property
    def median_ssim(self):
        return float(np.median(self.ssim_values))

    def to_dict(self):
        return {
            "views": [
                {"id": i, "psnr": p, "ssim": s}
                for i, p, s in zip(self.view_ids, self.psnr_values, self.ssim_values)
            ],
            "mean_psnr": self.mean_psnr,
            "median_psnr": self.median_psnr,
            "mean_ssim": self.mean_ssim,
            "median_ssim": self.median_ssim,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def evaluate_pairs(pairs, ids=None):
    """PSNR/SSIM over (predicted, ground-truth) raster pairs."""
    report = EvalReport()
    for k, (pred, gt) in enumerate(pairs):
        vid = ids[k] if ids is not None else k
        report.add(vid, psnr(pred, gt), ssim(pred, gt))
    return report


def evaluate_views(cloud, poses, gt_images, background=(0.0, 0.0, 0.0)):
    """Render each pose and score against its ground-truth image."""
    from .render import render

    pairs = []
    ids = []
    for pose, gt in zip(poses, gt_images):
        out = render(cloud, pose, background)
        pairs.append((out.color, gt))
        ids.append(pose.id)
    return evaluate_pairs(pairs, ids)
