"""Client for the view-enhancement service, plus in-process stub backends.

Wire protocol (HTTP + JSON, images as base64 PNG, masks as base64 8-bit PNG
with 255 = to-inpaint):

    GET  /v1/health  -> {"status":"ok","backend":"<tag>"}
    POST /v1/inpaint {"image","mask","prompt","steps","t_min","t_max"}
                     -> {"image","backend"}
    POST /v1/clean   {"image","prompt","image_guidance","text_guidance",
                      "steps","t_min","t_max"} -> {"image","backend"}

Request bodies are canonical JSON (sorted keys, compact separators) so that
recorded request/response fixtures compare byte-for-byte. The in-process
stub client runs the same encode/decode path without sockets, which keeps
the whole pipeline testable with no service running.
"""

from __future__ import annotations

import base64
import io
import json
import time
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import EnhancerUnavailable, ProtocolViolation

STUB_TAGS = ("stub-identity", "stub-blur", "stub-maskfill")


# --------------------------------------------------------------------------
# payload codecs


def to_uint8(image):
    """Float [0,1] raster -> uint8 (uint8 passes through)."""
    image = np.asarray(image)
    if image.dtype == np.uint8:
        return image
    return np.clip(np.rint(np.clip(image, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)


def encode_image(image_u8):
    buf = io.BytesIO()
    Image.fromarray(image_u8).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_image(payload):
    raw = base64.b64decode(payload)
    with Image.open(io.BytesIO(raw)) as im:
        return np.asarray(im.convert("RGB") if im.mode not in ("RGB", "L") else im)


def encode_mask(mask):
    m = (np.asarray(mask) > 0).astype(np.uint8) * 255
    buf = io.BytesIO()
    Image.fromarray(m, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_mask(payload):
    raw = base64.b64decode(payload)
    with Image.open(io.BytesIO(raw)) as im:
        return (np.asarray(im.convert("L")) >= 128).astype(np.uint8)


def canonical_json(body):
    return json.dumps(body, sort_keys=True, separators=(",", ":")).encode("ascii")


# --------------------------------------------------------------------------
# request / response


@dataclass
class EnhanceRequest:
    stage: str  # "inpaint" | "clean"
    image: np.ndarray  # uint8 HxWx3
    mask: np.ndarray | None = None  # uint8 HxW, 1 = to-inpaint
    prompt: str = ""
    steps: int = 20
    image_guidance: float = 2.5
    text_guidance: float = 7.0
    t_min: float = 0.98
    t_max: float = 0.99

    def endpoint(self):
        return f"/v1/{self.stage}"

    def to_body(self):
        body = {
            "image": encode_image(self.image),
            "prompt": self.prompt,
            "steps": self.steps,
            "t_min": self.t_min,
            "t_max": self.t_max,
        }
        if self.stage == "inpaint":
            if self.mask is None:
                raise ProtocolViolation("inpaint request requires a mask")
            body["mask"] = encode_mask(self.mask)
        elif self.stage == "clean":
            body["image_guidance"] = self.image_guidance
            body["text_guidance"] = self.text_guidance
        else:
            raise ProtocolViolation(f"unknown stage {self.stage!r}")
        return body

    def to_wire(self):
        return canonical_json(self.to_body())


@dataclass
class EnhanceResponse:
    image: np.ndarray  # uint8 HxWx3
    backend: str


def parse_response(body, request: EnhanceRequest) -> EnhanceResponse:
    img = decode_image(body["image"])
    if img.shape[:2] != request.image.shape[:2]:
        raise ProtocolViolation(
            f"response image is {img.shape[:2]}, request was {request.image.shape[:2]}"
        )
    return EnhanceResponse(image=img, backend=body.get("backend", "unknown"))


# --------------------------------------------------------------------------
# stub backends (deterministic test doubles for the diffusion service)


def stub_identity(image_u8, mask=None):
    return image_u8.copy()


def stub_blur(image_u8, mask=None, radius=2):
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


def stub_maskfill(image_u8, mask=None):
    """Fill masked pixels by iterated nearest-unmasked-neighbor averaging.

    Unmasked pixels are returned untouched; a fully masked image becomes the
    uniform mean color of the input.
    """
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


_STUB_FUNCS = {
    "stub-identity": stub_identity,
    "stub-blur": stub_blur,
    "stub-maskfill": stub_maskfill,
}


def apply_stub_backend(tag, endpoint, body):
    """Service-side semantics of a stub: request body dict -> response body dict."""
    fn = _STUB_FUNCS[tag]
    image = decode_image(body["image"])
    mask = decode_mask(body["mask"]) if "mask" in body else None
    out = fn(image, mask)
    return {"image": encode_image(out), "backend": tag}


# --------------------------------------------------------------------------
# clients


class InProcessStubClient:
    """Runs a stub backend through the full wire encode/decode round trip."""

    def __init__(self, tag="stub-identity"):
        if tag not in _STUB_FUNCS:
            raise ValueError(f"unknown stub tag {tag!r}; choose from {STUB_TAGS}")
        self.tag = tag

    def health(self):
        return {"status": "ok", "backend": self.tag}

    def call(self, request: EnhanceRequest) -> EnhanceResponse:
        body = json.loads(request.to_wire())
        response_body = apply_stub_backend(self.tag, request.endpoint(), body)
        response_body = json.loads(canonical_json(response_body))
        return parse_response(response_body, request)


class HttpEnhancerClient:
    """Talks to a running enhancement service; 3 attempts with backoff."""

    def __init__(self, base_url, attempts=3, backoff=1.0, timeout=60.0):
        self.base_url = base_url.rstrip("/")
        self.attempts = attempts
        self.backoff = backoff
        self.timeout = timeout

    def health(self):
        import requests

        r = requests.get(f"{self.base_url}/v1/health", timeout=self.timeout)
        r.raise_for_status()
        return r.json()

    def call(self, request: EnhanceRequest) -> EnhanceResponse:
        import requests

        body = request.to_wire()
        last = None
        for attempt in range(self.attempts):
            try:
                r = requests.post(
                    self.base_url + request.endpoint(),
                    data=body,
                    headers={"Content-Type": "application/json"},
                    timeout=self.timeout,
                )
                r.raise_for_status()
                return parse_response(r.json(), request)
            except (requests.RequestException, ValueError) as exc:
                last = exc
                if attempt + 1 < self.attempts:
                    time.sleep(self.backoff * (2 ** attempt))
        raise EnhancerUnavailable(f"enhancer failed after {self.attempts} attempts: {last}")


def make_client(locator, **kwargs):
    """Build a client from a locator: 'stub:<tag>' or an http(s) URL."""
    if locator.startswith("stub:"):
        return InProcessStubClient("stub-" + locator.split(":", 1)[1])
    if locator.startswith(("http://", "https://")):
        return HttpEnhancerClient(locator, **kwargs)
    raise ValueError(f"cannot interpret enhancer locator {locator!r}")
