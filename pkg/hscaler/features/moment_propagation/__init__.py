"""
Moment Propagation Feature Package

Exposes components for propagating Gaussian moments through a protocol.
"""

from . import models, tool, routes

__all__ = ["models", "tool", "routes"]
