"""Enhancement backends.

Deterministic stubs serve as test doubles for the diffusion models; the
DiffusionBackend adapter wraps caller-provided denoising pipelines and
advertises an endpoint capability only when the corresponding pipeline is
available. cfg_combine implements the two-scale classifier-free guidance
combination used by image-and-text conditioned samplers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    pass


class BackendUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class BackendDescriptor:
    tag: str
    inpaint: bool = True
    clean: bool = True


def cfg_combine(eps_uncond, eps_img, eps_txt_img, s_img, s_txt):
    """Guided noise estimate from unconditional, image- and text+image terms.

    eps_uncond + s_img * (eps_img - eps_uncond) + s_txt * (eps_txt_img - eps_img)
    """
    eps_uncond = np.asarray(eps_uncond)
    eps_img = np.asarray(eps_img)
    eps_txt_img = np.asarray(eps_txt_img)
    if not (eps_uncond.shape == eps_img.shape == eps_txt_img.shape):
        raise ShapeError(
            f"noise tensors must share a shape, got {eps_uncond.shape}, "
            f"{eps_img.shape}, {eps_txt_img.shape}"
        )
    return eps_uncond + s_img * (eps_img - eps_uncond) + s_txt * (eps_txt_img - eps_img)


# --- deterministic stubs (must match the client-side fixtures bit-for-bit) ---


def identity_fill(image_u8, mask=None):
    return image_u8.copy()


def box_blur(image_u8, mask=None, radius=2):
    """Box blur with edge clamping; 5x5 window at the default radius."""
    img = image_u8.astype(np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    pad = np.pad(img, ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    out = np.zeros_like(img)
    k = 2 * radius + 1
    for dy in range(k):
        for dx in range(k):
            out += pad[dy : dy + img.shape[0], dx : dx + img.shape[1], :]
    out /= k * k
    out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out[:, :, 0] if image_u8.ndim == 2 else out


def nearest_neighbor_fill(image_u8, mask=None):
    """Fill masked pixels by iterated nearest-unmasked-neighbor averaging."""
    img = image_u8.astype(np.float64)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[:, :, None]
    if mask is None:
        return image_u8.copy()
    filled = ~(np.asarray(mask) > 0)
    if filled.all():
        return image_u8.copy()
    if not filled.any():
        mean = img.reshape(-1, img.shape[2]).mean(axis=0)
        out = np.tile(np.rint(mean), (img.shape[0], img.shape[1], 1)).astype(np.uint8)
        return out[:, :, 0] if squeeze else out

    out = img.copy()
    out[~filled] = 0.0
    filled = filled.copy()
    while not filled.all():
        f = filled.astype(np.float64)
        neighbor_sum = np.zeros_like(out)
        neighbor_cnt = np.zeros(filled.shape)
        for shift, axis in (((1, 0), 0), ((-1, 0), 0), ((0, 1), 1), ((0, -1), 1)):
            s = shift[0] or shift[1]
            rolled = np.roll(out, s, axis=axis)
            rolled_f = np.roll(f, s, axis=axis)
            if axis == 0:
                edge = 0 if s == 1 else -1
                rolled[edge, :, :] = 0.0
                rolled_f[edge, :] = 0.0
            else:
                edge = 0 if s == 1 else -1
                rolled[:, edge, :] = 0.0
                rolled_f[:, edge] = 0.0
            neighbor_sum += rolled * rolled_f[:, :, None]
            neighbor_cnt += rolled_f
        frontier = (~filled) & (neighbor_cnt > 0)
        out[frontier] = neighbor_sum[frontier] / neighbor_cnt[frontier][:, None]
        filled |= frontier
    out = np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out[:, :, 0] if squeeze else out


_STUBS = {
    "stub-identity": identity_fill,
    "stub-blur": box_blur,
    "stub-maskfill": nearest_neighbor_fill,
}


@dataclass
class StubBackend:
    tag: str

    def __post_init__(self):
        if self.tag not in _STUBS:
            raise BackendUnavailable(f"unknown stub {self.tag!r}; choose from {sorted(_STUBS)}")
        self._fn = _STUBS[self.tag]

    @property
    def descriptor(self):
        return BackendDescriptor(tag=self.tag, inpaint=True, clean=True)

    def inpaint(self, image_u8, mask, params):
        return self._fn(image_u8, mask)

    def clean(self, image_u8, params):
        return self._fn(image_u8, None)


@dataclass
class DiffusionBackend:
    """Adapter around pretrained denoising pipelines.

    Pipelines are injected by the operator (callables taking image/mask plus
    guidance parameters and returning a uint8 image); an endpoint whose
    pipeline is missing has its capability flag off and is refused at
    request time. Given a seed in the request, results are deterministic per
    seed on fixed hardware.
    """

    inpaint_pipeline: object = None
    clean_pipeline: object = None
    tag: str = "diffusion"

    @property
    def descriptor(self):
        return BackendDescriptor(
            tag=self.tag,
            inpaint=self.inpaint_pipeline is not None,
            clean=self.clean_pipeline is not None,
        )

    def inpaint(self, image_u8, mask, params):
        if self.inpaint_pipeline is None:
            raise BackendUnavailable("no in-painting pipeline configured")
        return self.inpaint_pipeline(image_u8, mask, params)

    def clean(self, image_u8, params):
        if self.clean_pipeline is None:
            raise BackendUnavailable("no artifact-removal pipeline configured")
        return self.clean_pipeline(image_u8, params)


def make_backend(tag, **kwargs):
    if tag.startswith("stub-"):
        return StubBackend(tag)
    if tag == "diffusion":
        return DiffusionBackend(**kwargs)
    raise BackendUnavailable(f"unknown backend {tag!r}")
