"""
Features package for the hscaler service surface

Each feature has its own models, routes, and tool implementations.
"""

from . import protocol_design
from . import moment_propagation

__all__ = ["protocol_design", "moment_propagation"]
