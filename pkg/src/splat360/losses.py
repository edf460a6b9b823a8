"""Raster losses and their gradients with respect to the first argument.

SSIM uses the standard 11x11 Gaussian window (sigma 1.5) with stability
constants C1=0.01^2, C2=0.03^2 on the [0,1] dynamic range, evaluated over
fully-interior windows. The Pearson depth loss is scale- and shift-invariant,
so its value equals 1 - PCC of the raw rasters over the valid pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ShapeError

SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
_WIN = 11
_HALF = _WIN // 2


def _gaussian_window():
    x = np.arange(_WIN, dtype=np.float64) - _HALF
    w = np.exp(-(x ** 2) / (2.0 * 1.5 ** 2))
    return w / w.sum()


_W1D = _gaussian_window()


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"raster shapes differ: {a.shape} vs {b.shape}")
    return a, b


def l1_loss(a, b):
    a, b = _check_pair(a, b)
    return float(np.abs(a - b).mean())


def l1_loss_grad(a, b):
    """(value, d value / d a). Subgradient 0 where a == b."""
    a, b = _check_pair(a, b)
    diff = a - b
    val = float(np.abs(diff).mean())
    return val, np.sign(diff) / diff.size


def _filter_valid(x):
    """Separable valid-mode correlation with the SSIM window."""
    y = correlate1d(x, _W1D, axis=0, mode="constant")
    y = correlate1d(y, _W1D, axis=1, mode="constant")
    return y[_HALF:-_HALF, _HALF:-_HALF]


def _filter_adjoint(y, shape):
    """Adjoint of _filter_valid: scatter window contributions back."""
    z = np.zeros(shape)
    z[_HALF:-_HALF, _HALF:-_HALF] = y
    z = correlate1d(z, _W1D, axis=0, mode="constant")
    z = correlate1d(z, _W1D, axis=1, mode="constant")
    return z


def _channels(a):
    if a.ndim == 2:
        return [a]
    return [a[:, :, c] for c in range(a.shape[2])]


def ssim(a, b):
    """Mean structural similarity over interior windows (and channels)."""
    val, _ = _ssim_and_grad(a, b, need_grad=False)
    return val


def _ssim_and_grad(a, b, need_grad=True):
    a, b = _check_pair(a, b)
    h, w = a.shape[:2]
    if h < _WIN or w < _WIN:
        raise ShapeError(f"rasters must be at least {_WIN}x{_WIN} for SSIM, got {h}x{w}")
    chans_a, chans_b = _channels(a), _channels(b)
    n_windows = (h - _WIN + 1) * (w - _WIN + 1) * len(chans_a)
    total = 0.0
    grad = np.zeros_like(a) if need_grad else None
    for c, (x, y) in enumerate(zip(chans_a, chans_b)):
        mu_x = _filter_valid(x)
        mu_y = _filter_valid(y)
        var_x = _filter_valid(x * x) - mu_x * mu_x
        var_y = _filter_valid(y * y) - mu_y * mu_y
        cov = _filter_valid(x * y) - mu_x * mu_y
        a1 = 2.0 * mu_x * mu_y + SSIM_C1
        a2 = 2.0 * cov + SSIM_C2
        b1 = mu_x * mu_x + mu_y * mu_y + SSIM_C1
        b2 = var_x + var_y + SSIM_C2
        denom = b1 * b2
        s = (a1 * a2) / denom
        total += float(s.sum())
        if need_grad:
            c1 = a2 / denom
            c2 = a1 / denom
            c3 = s / b1
            c4 = s / b2
            g = (
                _filter_adjoint(c1 * mu_y - c2 * mu_y - c3 * mu_x + c4 * mu_x, (h, w))
                + y * _filter_adjoint(c2, (h, w))
                - x * _filter_adjoint(c4, (h, w))
            )
            g *= 2.0 / n_windows
            if a.ndim == 2:
                grad = g
            else:
                grad[:, :, c] = g
    return total / n_windows, grad


def dssim_loss(a, b):
    """(1 - SSIM)/2, the structural dissimilarity."""
    return (1.0 - ssim(a, b)) / 2.0


def dssim_loss_grad(a, b):
    val, g = _ssim_and_grad(a, b, need_grad=True)
    return (1.0 - val) / 2.0, -0.5 * g


@dataclass
class PccResult:
    loss: float
    grad: np.ndarray  # d loss / d d_ras, zero outside the valid mask
    degenerate: bool  # set when < 2 valid pixels or zero variance


def pcc_depth_loss(d_ras, d_est, valid=None) -> PccResult:
    """1 - Pearson correlation between rendered and estimated depth.

    Invariant under positive affine maps of either argument; value in [0,2].
    Degenerate inputs fall back to the uncorrelated loss of 1 with zero
    gradient.
    """
    d_ras, d_est = _check_pair(d_ras, d_est)
    if valid is None:
        mask = np.isfinite(d_ras) & np.isfinite(d_est)
    else:
        mask = np.asarray(valid, dtype=bool)
        if mask.shape != d_ras.shape:
            raise ShapeError(f"valid mask shape {mask.shape} != raster shape {d_ras.shape}")
        mask = mask & np.isfinite(d_ras) & np.isfinite(d_est)
    grad = np.zeros_like(d_ras)
    n = int(mask.sum())
    if n < 2:
        return PccResult(loss=1.0, grad=grad, degenerate=True)
    x = d_ras[mask]
    y = d_est[mask]
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx <= 0.0 or syy <= 0.0:
        return PccResult(loss=1.0, grad=grad, degenerate=True)
    sxy = float(xc @ yc)
    root = np.sqrt(sxx * syy)
    r = sxy / root
    # d r / d x = (yc - xc * sxy / sxx) / root ; loss = 1 - r
    gx = -(yc - xc * (sxy / sxx)) / root
    grad[mask] = gx
    return PccResult(loss=float(1.0 - r), grad=grad, degenerate=False)


def sample_loss(render_color, pseudo_gt, t_weight, perceptual=None):
    """Weighted photometric + perceptual loss against an enhanced pseudo view.

    Returns (value, d value / d render_color). The perceptual term defaults
    to the structural dissimilarity and accepts any (a, b) -> (value, grad_a)
    functional.
    """
    a, b = _check_pair(render_color, pseudo_gt)
    if perceptual is None:
        perceptual = dssim_loss_grad
    if t_weight == 0.0:
        return 0.0, np.zeros_like(a)
    l1_val, l1_g = l1_loss_grad(a, b)
    p_val, p_g = perceptual(a, b)
    return t_weight * (l1_val + p_val), t_weight * (l1_g + p_g)


def photometric_loss_grad(render_color, gt, lambda1=0.2):
    """(1-lambda1) L1 + lambda1 D-SSIM, with gradient wrt the render."""
    l1_val, l1_g = l1_loss_grad(render_color, gt)
    d_val, d_g = dssim_loss_grad(render_color, gt)
    val = (1.0 - lambda1) * l1_val + lambda1 * d_val
    grad = (1.0 - lambda1) * l1_g + lambda1 * d_g
    return val, grad, l1_val, d_val
