"""HTTP service wrapping the simulator; the CLI talks to these endpoints."""

from .app import create_app

__all__ = ["create_app"]
