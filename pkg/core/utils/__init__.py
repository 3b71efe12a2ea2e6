"""
Core utilities for docstring injection and instruction loading.

Tool docstrings are the descriptions MCP clients see; they are kept in
markdown files next to each feature and injected at import time.
"""

from .docstring_injector import inject_docstring
from .load_instructions import load_instruction

__all__ = [
    'inject_docstring',
    'load_instruction',
]
