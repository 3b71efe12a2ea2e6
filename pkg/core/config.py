"""
Core configuration for shared infrastructure

Provides base configuration classes that can be reused by any numerical
service: compute resources, output locations and the optional HTTP server.
Handles environment variable loading (including a local .env file).
"""

import os
from pathlib import Path
from typing import Optional, TypeVar, Type, Dict, Any
from pydantic import BaseModel, Field
from dotenv import load_dotenv

# Load environment variables from .env file if present
load_dotenv()

T = TypeVar('T', bound=BaseModel)

_TRUTHY = ("true", "yes", "1", "on")


def _env_int(name: str) -> Optional[int]:
    """Read an integer environment variable, ignoring unparsable values"""
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return None
    try:
        return int(raw)
    except ValueError:
        return None


class BaseComputeConfig(BaseModel):
    """
    Compute resource configuration

    Caps the number of worker threads used by FFTs and by per-chunk
    ensemble work. Results never depend on the thread count.
    """
    threads: int = Field(
        default_factory=lambda: max(1, os.cpu_count() or 1),
        ge=1,
        le=512,
        description="Maximum number of worker threads"
    )

    @classmethod
    def from_env(cls: Type[T], env_prefix: str = "") -> T:
        """
        Load compute configuration from environment variables

        Args:
            env_prefix: Optional prefix for environment variables

        Returns:
            Configured compute instance
        """
        kwargs: Dict[str, Any] = {}
        threads = _env_int(f"{env_prefix}THREADS")
        if threads is not None and threads >= 1:
            kwargs["threads"] = threads
        return cls(**kwargs)


class BaseOutputConfig(BaseModel):
    """
    Output location configuration

    Datasets are written below a single directory; each command owns
    its own file names inside it.
    """
    directory: Path = Field(
        default_factory=lambda: Path("out"),
        description="Directory that receives CSV datasets and JSON sidecars"
    )
    float_format: str = Field(
        default=".17g",
        description="Format spec used for every floating point value written to CSV"
    )

    @classmethod
    def from_env(cls: Type[T], env_prefix: str = "") -> T:
        """
        Load output configuration from environment variables

        Args:
            env_prefix: Optional prefix for environment variables

        Returns:
            Configured output instance
        """
        kwargs: Dict[str, Any] = {}
        directory = os.getenv(f"{env_prefix}OUTPUT_DIR")
        if directory:
            kwargs["directory"] = Path(directory)
        return cls(**kwargs)


class BaseServerConfig(BaseModel):
    """
    Base HTTP server configuration

    Controls how the optional service surface listens for connections.
    Can be extended for specific server implementations.
    """
    host: str = Field(
        default="127.0.0.1",
        description="Bind address"
    )
    port: int = Field(
        default=3000,
        ge=1,
        le=65535,
        description="Port number for HTTP server"
    )
    transport: str = Field(
        default="stdio",
        description="Transport mode: 'stdio' for direct MCP, 'http' for web server"
    )
    mcp_only: bool = Field(
        default=False,
        description="If True, serve pure MCP protocol; if False, serve REST + MCP"
    )

    @classmethod
    def from_env(cls: Type[T], env_prefix: str = "") -> T:
        """
        Load server configuration from environment variables

        Args:
            env_prefix: Optional prefix for environment variables

        Returns:
            Configured server instance
        """
        host = os.getenv(f"{env_prefix}HOST", "127.0.0.1")
        transport = os.getenv(f"{env_prefix}TRANSPORT", "stdio").lower()
        mcp_only = os.getenv(f"{env_prefix}MCP_ONLY", "false").lower() in _TRUTHY
        port = _env_int(f"{env_prefix}PORT") or 3000

        kwargs: Dict[str, Any] = {
            "host": host,
            "port": port,
            "transport": transport,
            "mcp_only": mcp_only,
        }

        return cls(**kwargs)


def log_level_from_env(default: str = "INFO") -> str:
    """Logging level name from LOG_LEVEL, upper-cased"""
    return os.getenv("LOG_LEVEL", default).upper()
