"""
Root and health endpoints
"""

from typing import Optional

from fastapi import APIRouter

from hscaler import __version__
from hscaler.shared.models import HealthResponse, ServiceInfo
from hscaler.units import CODE_UNITS_NOTE

ENDPOINTS = {
    "health": "GET /health",
    "protocol": "POST /protocol",
    "moments": "POST /moments",
    "docs": "/docs",
    "mcp": "/mcp (MCP protocol)",
}


def create_base_router(threads: Optional[int] = None) -> APIRouter:
    """
    Args:
        threads: Worker thread cap reported by /health
    """
    router = APIRouter(tags=["base"])

    @router.get("/", summary="Service Information", response_model=ServiceInfo)
    async def root() -> ServiceInfo:
        return ServiceInfo(
            version=__version__,
            description=(
                "Designs harmonic-trap frequency programs that scale momenta or positions "
                "independently of the initial state, and propagates moments through them."
            ),
            units=CODE_UNITS_NOTE,
            endpoints=ENDPOINTS,
        )

    @router.get("/health", summary="Health Check", response_model=HealthResponse, tags=["monitoring"])
    async def health() -> HealthResponse:
        return HealthResponse(version=__version__, compute_threads=threads)

    return router
