"""Explicit scene representation: a cloud of anisotropic 3D Gaussians.

Parameterization keeps every constraint unconditional: scales are stored as
logs, opacities as pre-sigmoid logits, rotations as unnormalized quaternions
(normalized in the forward pass). Colors are plain RGB in [0,1] (degree-0
view-independent shading).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import CorruptRaster, FormatError, InitializationError

CLOUD_MAGIC = b"GCLD"


def sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def logit(p):
    p = np.asarray(p, dtype=np.float64)
    return np.log(p) - np.log1p(-p)


@dataclass(eq=False)
class GaussianCloud:
    means: np.ndarray  # (G,3)
    log_scales: np.ndarray  # (G,3)
    rotations: np.ndarray  # (G,4) quaternions, normalized in forward
    opacity_logits: np.ndarray  # (G,)
    colors: np.ndarray  # (G,3) in [0,1]

    PARAM_FIELDS = ("means", "log_scales", "rotations", "opacity_logits", "colors")

    def __post_init__(self):
        g = None
        for name in self.PARAM_FIELDS:
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            setattr(self, name, arr)
            if g is None:
                g = arr.shape[0]
            elif arr.shape[0] != g:
                raise ValueError(f"{name} has {arr.shape[0]} rows, expected {g}")
        self.means = self.means.reshape(-1, 3)
        self.log_scales = self.log_scales.reshape(-1, 3)
        self.rotations = self.rotations.reshape(-1, 4)
        self.opacity_logits = self.opacity_logits.reshape(-1)
        self.colors = self.colors.reshape(-1, 3)

    def __len__(self):
        return self.means.shape[0]

    @property
    def scales(self):
        return np.exp(self.log_scales)

    @property
    def opacities(self):
        return sigmoid(self.opacity_logits)

    @property
    def unit_quaternions(self):
        n = np.linalg.norm(self.rotations, axis=1, keepdims=True)
        return self.rotations / n

    def copy(self):
        return GaussianCloud(
            means=self.means.copy(),
            log_scales=self.log_scales.copy(),
            rotations=self.rotations.copy(),
            opacity_logits=self.opacity_logits.copy(),
            colors=self.colors.copy(),
        )

    def select(self, idx):
        return GaussianCloud(
            means=self.means[idx],
            log_scales=self.log_scales[idx],
            rotations=self.rotations[idx],
            opacity_logits=self.opacity_logits[idx],
            colors=self.colors[idx],
        )

    @staticmethod
    def concatenate(clouds):
        return GaussianCloud(
            means=np.concatenate([c.means for c in clouds]),
            log_scales=np.concatenate([c.log_scales for c in clouds]),
            rotations=np.concatenate([c.rotations for c in clouds]),
            opacity_logits=np.concatenate([c.opacity_logits for c in clouds]),
            colors=np.concatenate([c.colors for c in clouds]),
        )

    # --- serialization: magic "GCLD", u32 count, per-Gaussian 14 float32
    #     (mean 3, log-scale 3, quaternion 4, opacity-logit 1, rgb 3) ---

    def to_bytes(self):
        g = len(self)
        rows = np.concatenate(
            [
                self.means,
                self.log_scales,
                self.rotations,
                self.opacity_logits[:, None],
                self.colors,
            ],
            axis=1,
        ).astype("<f4")
        return CLOUD_MAGIC + struct.pack("<I", g) + rows.tobytes()

    @classmethod
    def from_bytes(cls, data):
        if data[:4] != CLOUD_MAGIC:
            raise FormatError(f"bad cloud magic {data[:4]!r}")
        if len(data) < 8:
            raise CorruptRaster("truncated cloud header")
        (g,) = struct.unpack("<I", data[4:8])
        expected = 8 + g * 14 * 4
        if len(data) != expected:
            raise CorruptRaster(f"cloud payload {len(data)} bytes, header implies {expected}")
        rows = np.frombuffer(data[8:], dtype="<f4").reshape(g, 14).astype(np.float64)
        return cls(
            means=rows[:, 0:3],
            log_scales=rows[:, 3:6],
            rotations=rows[:, 6:10],
            opacity_logits=rows[:, 10],
            colors=rows[:, 11:14],
        )

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path):
        return cls.from_bytes(Path(path).read_bytes())


def init_from_point_cloud(point_cloud, initial_opacity=0.1):
    """Seed a cloud from SfM points: isotropic scale from 3-NN mean distance."""
    pts = np.asarray(point_cloud.points, dtype=np.float64)
    if pts.shape[0] == 0:
        raise InitializationError("point cloud is empty; cannot initialize Gaussians")
    g = pts.shape[0]
    if g >= 2:
        k = min(4, g)  # self plus up to 3 neighbors
        tree = cKDTree(pts)
        dist, _ = tree.query(pts, k=k)
        nn = dist[:, 1:].mean(axis=1)
        nn = np.maximum(nn, 1e-7)
    else:
        nn = np.full(g, 0.1)
    colors = np.clip(np.asarray(point_cloud.colors, dtype=np.float64), 0.0, 1.0)
    if colors.shape[0] != g:
        colors = np.full((g, 3), 0.5)
    rotations = np.zeros((g, 4))
    rotations[:, 0] = 1.0
    return GaussianCloud(
        means=pts.copy(),
        log_scales=np.log(nn)[:, None].repeat(3, axis=1),
        rotations=rotations,
        opacity_logits=np.full(g, float(logit(initial_opacity))),
        colors=colors,
    )
