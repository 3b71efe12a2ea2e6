"""
hscaler MCP server implementation using the reusable base server

Exposes protocol design and moment propagation as MCP tools and REST
endpoints. Uses a feature-based architecture where each feature has its own
models, routes, and tool implementations.
"""

import logging
from typing import List, Optional

from fastapi import APIRouter, FastAPI, HTTPException
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastmcp import FastMCP

from core.server import BaseMCPServer, BaseService
from hscaler import __version__
from hscaler.config import AppConfig, load_config
from hscaler.errors import ConfigurationError, HScalerError
from hscaler.features import moment_propagation, protocol_design
from hscaler.routes import create_base_router
from hscaler.scaling_service import ScalingService
from hscaler.shared.models import ErrorDetail, ErrorResponse

logger = logging.getLogger(__name__)


# ============================================================================
# Service Implementation
# ============================================================================

class HScalerMCPService(BaseService):
    """Protocol design and moment propagation for MCP"""

    def __init__(self, config: AppConfig):
        """
        Initialize the MCP service

        Args:
            config: Application configuration
        """
        self.config = config
        self.scaling_service: Optional[ScalingService] = None

    def initialize(self) -> None:
        """Create the scaling service"""
        self.scaling_service = ScalingService(threads=self.config.compute.threads)
        logger.info("HScalerMCPService initialized")

    def get_service_name(self) -> str:
        return "hscaler"

    def register_mcp_tools(self, mcp: FastMCP) -> None:
        """Register the feature tools"""
        if self.scaling_service is None:
            raise ValueError("Scaling service not initialized")

        protocol_design.tool.register_tool(mcp, self.scaling_service)
        moment_propagation.tool.register_tool(mcp, self.scaling_service)
        logger.info("Registered design_protocol and propagate_moments tools with MCP server")


# ============================================================================
# Server Implementation
# ============================================================================

class HScalerMCPServer(BaseMCPServer):
    """hscaler-specific MCP server"""

    @property
    def service_title(self) -> str:
        return "hscaler"

    @property
    def service_description(self) -> str:
        return (
            "Inverse-engineered harmonic-trap protocols for state-independent momentum "
            "and position scaling. Provides both MCP protocol access and REST API endpoints."
        )

    @property
    def service_version(self) -> str:
        return __version__

    @property
    def allowed_cors_origins(self) -> List[str]:
        return self.config.server.cors_origins

    def create_router(self) -> APIRouter:
        """
        Create a FastAPI router for REST endpoints

        Returns:
            Router with the feature and base endpoints
        """
        service = self.service.scaling_service or ScalingService(threads=self.config.compute.threads)

        main_router = APIRouter()
        main_router.include_router(protocol_design.routes.create_router(service))
        main_router.include_router(moment_propagation.routes.create_router(service))
        main_router.include_router(create_base_router(self.config.compute.threads))
        return main_router

    def register_exception_handlers(self, app: FastAPI) -> None:
        """
        Register exception handlers for the FastAPI application

        Configuration errors map to 400, every other domain error to 422.
        """
        def error_response(status_code: int, message: str, error_code: str, details=None) -> JSONResponse:
            body = ErrorResponse(error=ErrorDetail(message=message, error_code=error_code, details=details))
            return JSONResponse(status_code=status_code, content=body.model_dump(mode="json"))

        @app.exception_handler(HScalerError)
        async def domain_exception_handler(request, exc: HScalerError):
            status_code = 400 if isinstance(exc, ConfigurationError) else 422
            logger.warning(f"{exc.error_code} on {request.url.path}: {exc.message}")
            return error_response(status_code, exc.message, exc.error_code, exc.details or None)

        @app.exception_handler(HTTPException)
        async def app_http_exception_handler(request, exc: HTTPException):
            return error_response(exc.status_code, str(exc.detail), f"HTTP_{exc.status_code}")

        @app.exception_handler(RequestValidationError)
        async def app_validation_exception_handler(request, exc: RequestValidationError):
            return error_response(
                422,
                "Validation error",
                "VALIDATION_ERROR",
                [{k: v for k, v in e.items() if k in ("loc", "msg", "type")} for e in exc.errors()]
            )

    def validate_configuration(self) -> None:
        """Log the effective configuration"""
        config = self.config
        logger.info("=" * 70)
        logger.info("hscaler - Configuration")
        logger.info("=" * 70)
        logger.info(f"Transport: {config.server.transport}")
        logger.info(f"MCP Only: {config.server.mcp_only}")
        if config.server.transport == "http":
            logger.info(f"Host: {config.server.host}")
            logger.info(f"Port: {config.server.port}")
            logger.info(f"CORS Origins: {', '.join(config.server.cors_origins)}")
        logger.info(f"Threads: {config.compute.threads}")
        logger.info("=" * 70)


# ============================================================================
# Entry Points
# ============================================================================

def serve(config: Optional[AppConfig] = None) -> int:
    """
    Run the server in the mode the configuration selects

    Returns:
        Process exit code
    """
    config = config or load_config(validate=True)
    server = HScalerMCPServer(config, HScalerMCPService(config))
    return server.run()


def create_app(config: Optional[AppConfig] = None) -> FastAPI:
    """
    Factory function to create the FastAPI application

    Useful for ASGI servers and in-process testing:
        uvicorn hscaler.server:create_app --factory

    Returns:
        Configured FastAPI application with MCP mounted
    """
    config = config or load_config(validate=True)
    server = HScalerMCPServer(config, HScalerMCPService(config))
    return server.create_app()


__all__ = [
    "serve",
    "create_app",
    "HScalerMCPService",
    "HScalerMCPServer"
]
