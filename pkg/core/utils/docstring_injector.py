"""
Decorator for dynamic docstring injection.

MCP clients see a tool's docstring as its description, so tools take theirs
from the feature's instructions file:

    @mcp.tool()
    @inject_docstring(lambda: load_instruction("instructions.md", __file__))
    def my_tool(...):
        ...
"""
from typing import Callable, TypeVar, Union

F = TypeVar("F", bound=Callable)


def inject_docstring(doc: Union[str, Callable[[], str]]) -> Callable[[F], F]:
    """
    Set a function's docstring before it is registered

    Args:
        doc: The docstring, or a callable evaluated once at decoration time
    """
    def decorator(func: F) -> F:
        func.__doc__ = doc() if callable(doc) else doc
        return func
    return decorator
