"""Spin-network energy landscapes, cavity rate kernels, and memory experiments."""

from .core import backend

__version__ = "0.1.0"

from . import cavity, connectivity, errors, landscape, memory, stats

__all__ = [
    "backend",
    "cavity",
    "connectivity",
    "errors",
    "landscape",
    "memory",
    "stats",
    "__version__",
]
