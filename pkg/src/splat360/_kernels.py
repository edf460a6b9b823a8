"""Fused per-pixel compositing kernels (numba, single-threaded, float64).

The forward kernel walks splats front-to-back per pixel, stopping once
transmittance drops below the cutoff and recording how many splats each
pixel composited. The backward kernel replays each pixel in reverse,
reconstructing entry transmittances by division, and accumulates the
per-splat quantities the chain rule needs. Both loops are sequential, so
results are bit-reproducible.
"""

import numpy as np
from numba import njit

ALPHA_CLAMP = 0.99
T_CUTOFF = 1e-4
SIG_SKIP = 30.0  # falloff below exp(-30): splat treated as alpha 0 at the pixel


@njit(cache=True, fastmath=True)
def composite_forward(u, v, ia, ib, ic, opacity, color, z, height, width, bg):
    n = u.shape[0]
    out_color = np.empty((height, width, 3))
    out_dacc = np.empty((height, width))
    out_T = np.empty((height, width))
    applied = np.empty((height, width), dtype=np.int64)
    for i in range(height):
        py = i + 0.5
        for j in range(width):
            px = j + 0.5
            T = 1.0
            cr = 0.0
            cg = 0.0
            cb = 0.0
            dacc = 0.0
            k = 0
            for g in range(n):
                if T < T_CUTOFF:
                    break
                k += 1
                dx = px - u[g]
                dy = py - v[g]
                sig = 0.5 * (ia[g] * dx * dx + ic[g] * dy * dy) + ib[g] * dx * dy
                if sig >= SIG_SKIP:
                    continue
                if sig < 0.0:
                    sig = 0.0
                al = opacity[g] * np.exp(-sig)
                if al > ALPHA_CLAMP:
                    al = ALPHA_CLAMP
                w = al * T
                cr += w * color[g, 0]
                cg += w * color[g, 1]
                cb += w * color[g, 2]
                dacc += w * z[g]
                T *= 1.0 - al
            out_color[i, j, 0] = cr + T * bg[0]
            out_color[i, j, 1] = cg + T * bg[1]
            out_color[i, j, 2] = cb + T * bg[2]
            out_dacc[i, j] = dacc
            out_T[i, j] = T
            applied[i, j] = k
    return out_color, out_dacc, out_T, applied


@njit(cache=True, fastmath=True)
def composite_backward(
    u, v, ia, ib, ic, opacity, color, z,
    grad_color, g_dacc, g_tfin, T_final, applied,
):
    n = u.shape[0]
    height, width = T_final.shape
    acc_color = np.zeros((n, 3))
    acc_zdepth = np.zeros(n)
    acc_op = np.zeros(n)
    acc_mu = np.zeros((n, 2))
    acc_cov = np.zeros((n, 3))
    for i in range(height):
        py = i + 0.5
        for j in range(width):
            px = j + 0.5
            k = applied[i, j]
            if k == 0:
                continue
            T_cur = T_final[i, j]
            acc = g_tfin[i, j] * T_cur
            gc0 = grad_color[i, j, 0]
            gc1 = grad_color[i, j, 1]
            gc2 = grad_color[i, j, 2]
            gd = g_dacc[i, j]
            for g in range(k - 1, -1, -1):
                dx = px - u[g]
                dy = py - v[g]
                sig = 0.5 * (ia[g] * dx * dx + ic[g] * dy * dy) + ib[g] * dx * dy
                if sig >= SIG_SKIP:
                    continue
                if sig < 0.0:
                    sig = 0.0
                gexp = np.exp(-sig)
                raw = opacity[g] * gexp
                al = raw if raw < ALPHA_CLAMP else ALPHA_CLAMP
                one_m = 1.0 - al
                T_entry = T_cur / one_m
                w = al * T_entry
                q = gc0 * color[g, 0] + gc1 * color[g, 1] + gc2 * color[g, 2] + gd * z[g]
                dl_da = q * T_entry - acc / one_m

                acc_color[g, 0] += w * gc0
                acc_color[g, 1] += w * gc1
                acc_color[g, 2] += w * gc2
                acc_zdepth[g] += w * gd
                if raw < ALPHA_CLAMP:
                    acc_op[g] += dl_da * gexp
                    s = -gexp * dl_da * opacity[g]
                    vx = ia[g] * dx + ib[g] * dy
                    vy = ib[g] * dx + ic[g] * dy
                    acc_mu[g, 0] -= s * vx
                    acc_mu[g, 1] -= s * vy
                    acc_cov[g, 0] -= 0.5 * s * vx * vx
                    acc_cov[g, 1] -= 0.5 * s * vx * vy
                    acc_cov[g, 2] -= 0.5 * s * vy * vy

                acc += q * w
                T_cur = T_entry
    return acc_color, acc_zdepth, acc_op, acc_mu, acc_cov
