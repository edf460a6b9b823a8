"""View-enhancement service: /v1/inpaint and /v1/clean with pluggable backends."""

__version__ = "0.1.0"

from .app import create_app, serve
from .backends import (
    BackendDescriptor,
    DiffusionBackend,
    ShapeError,
    StubBackend,
    cfg_combine,
    make_backend,
)
