"""Base64-PNG payload codecs for the wire protocol."""

import base64
import io

import numpy as np
from PIL import Image


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
