"""HTTP service layer: FastAPI app factory plus request/response schemas."""
from .app import create_app
from .schemas import RunConfig

__all__ = ["create_app", "RunConfig"]
