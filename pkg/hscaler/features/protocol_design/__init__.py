"""
Protocol Design Feature Package

Exposes components for designing scaling protocols.
"""

from . import models, tool, routes

__all__ = ["models", "tool", "routes"]
