"""The view-enhancement wire protocol, end to end.

Runs a render through the two-stage enhancement (in-paint, then clean) via
the in-process stub client, printing the exact JSON bodies that would cross
the HTTP boundary. Point ENHANCER_URL at a running service (for example
``python -m enhancer_service --backend stub-blur --port 8085`` from the
service package) to exercise the same calls over sockets.
"""

import json
import os

import numpy as np

from splat360 import LoopConfig
from splat360.enhance import EnhanceRequest, InProcessStubClient, make_client, to_uint8
from splat360.loop import enhance_view
from splat360.render import opacity_mask, render
from splat360.synthetic import make_ring_scene

scene, gt_cloud = make_ring_scene(n_gaussians=12, n_views=6, image_size=32, seed=8)
out = render(gt_cloud, scene.poses[0])

# what a single in-paint request looks like on the wire
req = EnhanceRequest(
    stage="inpaint",
    image=to_uint8(out.color),
    mask=opacity_mask(out.alpha, 0.8),
    prompt="A photo of [V]",
)
body = json.loads(req.to_wire())
print("inpaint request keys:", sorted(body))
print("payload sizes: image", len(body["image"]), "chars, mask", len(body["mask"]), "chars")

locator = os.environ.get("ENHANCER_URL", "stub:maskfill")
client = make_client(locator)
print("backend:", client.health())

cfg = LoopConfig(tau=0.8)
enhanced = enhance_view(client, out, cfg, step_frac=0.5)
print("enhanced image shape:", enhanced.shape, "range",
      round(float(enhanced.min()), 3), "-", round(float(enhanced.max()), 3))

identity = InProcessStubClient("stub-identity")
round_trip = enhance_view(identity, out, cfg)
quantized = to_uint8(out.color).astype(float) / 255.0
print("identity stub round-trip exact:", bool(np.array_equal(round_trip, quantized)))
