"""Sandboxed candidate-execution worker."""

from .worker import CONSTRUCTION_HOOK, handle_request, serve

__all__ = ["CONSTRUCTION_HOOK", "handle_request", "serve"]
