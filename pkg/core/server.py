"""
Service surface shared by computational back ends

A back end implements BaseService (its MCP tools) and subclasses
BaseMCPServer (its REST router and error mapping). The server then runs in
one of three modes: MCP over stdio, MCP over HTTP, or REST and MCP side by
side in one FastAPI application.
"""

import abc
import argparse
import logging
import os
import sys
from enum import Enum
from typing import Any, Callable, Dict, List

import flatdict
import uvicorn
from fastapi import APIRouter, FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastmcp import FastMCP

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)


def configure_logging(level: str = "INFO", stream=None) -> None:
    """
    Install the root log handler

    Args:
        level: Logging level name (DEBUG, INFO, WARNING, ERROR)
        stream: Output stream (stdout by default; stdio MCP servers pass stderr)
    """
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(stream or sys.stdout)],
        force=True
    )


class ServerMode(str, Enum):
    STDIO = "stdio"
    MCP_HTTP = "mcp"
    REST = "rest"


class BaseService(abc.ABC):
    """
    Computation exposed through the server

    Independent of transport and protocol; the same instance backs the MCP
    tools and the REST routes.
    """

    @abc.abstractmethod
    def initialize(self) -> None:
        """Prepare resources before the first request"""

    @abc.abstractmethod
    def get_service_name(self) -> str:
        """Name of the MCP server"""

    @abc.abstractmethod
    def register_mcp_tools(self, mcp: FastMCP) -> None:
        """Attach this service's tools to the FastMCP instance"""

    def cleanup(self) -> None:
        """Release resources on shutdown (nothing by default)"""


class BaseMCPServer(abc.ABC):
    """
    Runs a BaseService over MCP, optionally with REST routes

    Subclasses provide the API metadata, the REST router and the exception
    handlers. Settings are read with dotted keys ('server.port') from the
    flattened configuration.
    """

    def __init__(self, config: Any, service: BaseService):
        """
        Args:
            config: Pydantic configuration with a `server` section
            service: Service to expose
        """
        self.config = config
        self.service = service
        dumped = config.model_dump(mode="json") if hasattr(config, "model_dump") else dict(config or {})
        self._settings = flatdict.FlatDict(dumped, delimiter=".")

    def get_config(self, key: str, default: Any = None) -> Any:
        """Configuration value by dotted key, or default"""
        return self._settings.get(key, default)

    @property
    @abc.abstractmethod
    def service_title(self) -> str:
        """Title shown in the API docs"""

    @property
    @abc.abstractmethod
    def service_description(self) -> str:
        """Description shown in the API docs"""

    @property
    @abc.abstractmethod
    def service_version(self) -> str:
        """Version string of the service"""

    @property
    @abc.abstractmethod
    def allowed_cors_origins(self) -> List[str]:
        """Origins allowed by the CORS middleware"""

    @abc.abstractmethod
    def create_router(self) -> APIRouter:
        """Router with every REST endpoint"""

    @abc.abstractmethod
    def register_exception_handlers(self, app: FastAPI) -> None:
        """Map domain exceptions to HTTP responses"""

    def validate_configuration(self) -> None:
        """
        Check and log the configuration before serving

        Raises:
            ValueError: If the configuration cannot be served
        """

    def resolve_mode(self) -> ServerMode:
        """stdio always serves MCP only; HTTP serves REST as well unless mcp_only is set"""
        if self.get_config("server.transport", "stdio") == "stdio":
            return ServerMode.STDIO
        if self.get_config("server.mcp_only", False):
            return ServerMode.MCP_HTTP
        return ServerMode.REST

    def create_mcp_app(self) -> FastMCP:
        mcp = FastMCP(self.service.get_service_name())
        self.service.register_mcp_tools(mcp)
        logger.info(f"FastMCP application created for {self.service.get_service_name()}")
        return mcp

    def create_fastapi_app(self, mcp: FastMCP, with_rest: bool = True) -> FastAPI:
        """
        FastAPI application with the MCP endpoint mounted at /mcp

        Args:
            mcp: FastMCP application
            with_rest: Include the REST router and exception handlers
        """
        mcp_app = mcp.http_app()
        app = FastAPI(
            title=self.service_title,
            description=self.service_description,
            version=self.service_version,
            lifespan=mcp_app.lifespan,
        )
        app.add_middleware(
            CORSMiddleware,
            allow_origins=self.allowed_cors_origins,
            allow_methods=["GET", "POST", "OPTIONS"],
            allow_headers=["Content-Type", "Accept", "Origin"],
        )
        if with_rest:
            app.include_router(self.create_router())
            self.register_exception_handlers(app)
        app.mount("/mcp", mcp_app)
        logger.info(f"FastAPI application created (REST={'on' if with_rest else 'off'}, MCP at /mcp)")
        return app

    def create_app(self) -> FastAPI:
        """
        REST + MCP application without starting a server

        For ASGI deployment and in-process testing.
        """
        self.validate_configuration()
        self.service.initialize()
        return self.create_fastapi_app(self.create_mcp_app())

    def _serve_stdio(self, mcp: FastMCP) -> None:
        logger.info(f"Starting {self.service_title} on stdio")
        mcp.run()

    def _serve_http(self, mcp: FastMCP, with_rest: bool) -> None:
        host = self.get_config("server.host", "127.0.0.1")
        port = self.get_config("server.port", 3000)
        logger.info(f"Starting {self.service_title} on http://{host}:{port}")
        if with_rest:
            logger.info(f"API Docs: http://{host}:{port}/docs")
        logger.info(f"MCP Endpoint: http://{host}:{port}/mcp")
        uvicorn.run(self.create_fastapi_app(mcp, with_rest=with_rest), host=host, port=port, log_level="info")

    def run(self) -> int:
        """
        Serve until interrupted

        Returns:
            Process exit code (1 when the configuration is rejected)
        """
        runners: Dict[ServerMode, Callable[[FastMCP], None]] = {
            ServerMode.STDIO: self._serve_stdio,
            ServerMode.MCP_HTTP: lambda mcp: self._serve_http(mcp, with_rest=False),
            ServerMode.REST: lambda mcp: self._serve_http(mcp, with_rest=True),
        }
        try:
            self.validate_configuration()
            self.service.initialize()
            mode = self.resolve_mode()
            logger.info(f"Server mode: {mode.value}")
            runners[mode](self.create_mcp_app())
            return 0
        except KeyboardInterrupt:
            logger.info("Shutdown requested by user")
            return 0
        except ValueError as e:
            logger.error(f"Configuration error: {e}")
            return 1
        finally:
            self.service.cleanup()


def add_server_arguments(parser: argparse.ArgumentParser) -> argparse.ArgumentParser:
    """Add --mode, --host and --port to a parser (or subparser)"""
    parser.add_argument(
        "--mode",
        choices=[m.value for m in ServerMode],
        default=ServerMode.STDIO.value,
        help="stdio (default), mcp (HTTP MCP-only), or rest (HTTP with REST API + MCP)"
    )
    parser.add_argument(
        "--host",
        default="127.0.0.1",
        help="Host to bind to for HTTP modes (default: 127.0.0.1)"
    )
    parser.add_argument(
        "--port",
        type=int,
        default=3000,
        help="Port to bind to for HTTP modes (default: 3000)"
    )
    return parser


def apply_cli_args_to_environment(args: argparse.Namespace, env_prefix: str = "") -> None:
    """
    Export parsed server arguments as <env_prefix>TRANSPORT, MCP_ONLY, HOST, PORT

    Must run before the configuration is loaded.
    """
    mode = ServerMode(args.mode)
    os.environ[f"{env_prefix}TRANSPORT"] = "stdio" if mode is ServerMode.STDIO else "http"
    os.environ[f"{env_prefix}MCP_ONLY"] = "false" if mode is ServerMode.REST else "true"
    if mode is not ServerMode.STDIO:
        os.environ[f"{env_prefix}HOST"] = args.host
        os.environ[f"{env_prefix}PORT"] = str(args.port)


__all__ = [
    "BaseMCPServer",
    "BaseService",
    "ServerMode",
    "add_server_arguments",
    "apply_cli_args_to_environment",
    "configure_logging",
]
