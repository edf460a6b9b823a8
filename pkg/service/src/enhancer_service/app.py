"""FastAPI application serving the enhancement wire protocol.

    GET  /v1/health  -> {"status":"ok","backend":"<tag>"}
    POST /v1/inpaint {"image","mask","prompt","steps","t_min","t_max"[,"seed"]}
    POST /v1/clean   {"image","prompt","image_guidance","text_guidance",
                      "steps","t_min","t_max"[,"seed"]}

Responses carry {"image","backend"}. Images are base64 PNG; masks are
base64 8-bit PNG with 255 marking pixels to in-paint. Requests over 16 MiB
are rejected with 413; an endpoint whose backend capability is off returns
503 with a diagnostic.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Request
from pydantic import BaseModel, Field, model_validator

from .backends import BackendUnavailable, make_backend
from .codec import decode_image, decode_mask, encode_image

MAX_REQUEST_BYTES = 16 * 1024 * 1024


class GuidanceFields(BaseModel):
    steps: int = Field(default=20, ge=1)
    t_min: float = Field(default=0.98, ge=0.0, le=1.0)
    t_max: float = Field(default=0.99, ge=0.0, le=1.0)
    seed: int | None = None

    @model_validator(mode="after")
    def _ordered(self):
        if self.t_min > self.t_max:
            raise ValueError("t_min must not exceed t_max")
        return self


class InpaintRequest(GuidanceFields):
    image: str
    mask: str
    prompt: str = ""


class CleanRequest(GuidanceFields):
    image: str
    prompt: str = ""
    image_guidance: float = 2.5
    text_guidance: float = 7.0


def create_app(backend="stub-identity", **backend_kwargs):
    """Build the service; backend may be a tag or a constructed backend object."""
    if isinstance(backend, str):
        backend = make_backend(backend, **backend_kwargs)
    desc = backend.descriptor
    app = FastAPI(title="view-enhancement service")

    @app.middleware("http")
    async def limit_size(request: Request, call_next):
        length = request.headers.get("content-length")
        if length is not None and int(length) > MAX_REQUEST_BYTES:
            from fastapi.responses import JSONResponse

            return JSONResponse({"detail": "request too large"}, status_code=413)
        return await call_next(request)

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "backend": desc.tag}

    @app.post("/v1/inpaint")
    def inpaint(req: InpaintRequest):
        if not desc.inpaint:
            raise HTTPException(503, f"backend {desc.tag} does not serve in-painting")
        image = decode_image(req.image)
        mask = decode_mask(req.mask)
        if mask.shape != image.shape[:2]:
            raise HTTPException(422, "mask dimensions do not match the image")
        try:
            out = backend.inpaint(image, mask, req)
        except BackendUnavailable as exc:
            raise HTTPException(503, str(exc))
        return {"image": encode_image(out), "backend": desc.tag}

    @app.post("/v1/clean")
    def clean(req: CleanRequest):
        if not desc.clean:
            raise HTTPException(503, f"backend {desc.tag} does not serve artifact removal")
        image = decode_image(req.image)
        try:
            out = backend.clean(image, req)
        except BackendUnavailable as exc:
            raise HTTPException(503, str(exc))
        return {"image": encode_image(out), "backend": desc.tag}

    return app


def serve(backend="stub-identity", host="127.0.0.1", port=8085, **backend_kwargs):
    """Run the service; raises before binding if the backend cannot be built."""
    import uvicorn

    app = create_app(backend, **backend_kwargs)
    uvicorn.run(app, host=host, port=port, log_level="warning")
