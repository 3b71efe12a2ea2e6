"""
Instruction loader for tool and route descriptions

Each feature keeps the description its MCP tool and REST route expose in an
`instructions.md` file next to the code.
"""

from functools import lru_cache
from pathlib import Path
from typing import Optional


@lru_cache(maxsize=None)
def _read(path: Path) -> str:
    return path.read_text(encoding="utf-8").strip()


def load_instruction(filename: str, module_path: Optional[str] = None) -> str:
    """
    Load an instruction markdown file

    Args:
        filename: Name of the .md file
        module_path: __file__ of the calling module; the file is resolved next to it

    Returns:
        Contents of the file without surrounding whitespace

    Raises:
        FileNotFoundError: If the file does not exist
    """
    base = Path(module_path).parent if module_path else Path.cwd()
    return _read((base / filename).resolve())
