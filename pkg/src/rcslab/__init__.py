"""Desk-scale laboratory for random circuit sampling."""

from ._kernels import BACKEND
from .errors import DecodeError, RCSLabError, ResourceError, ValidationError

__version__ = "0.1.0"

__all__ = ["BACKEND", "DecodeError", "RCSLabError", "ResourceError", "ValidationError"]
