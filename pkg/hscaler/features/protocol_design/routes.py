"""
Protocol Design Routes Module

Defines the FastAPI endpoint for designing frequency programs.
"""

import logging
from typing import TYPE_CHECKING

from fastapi import APIRouter

from core.utils import load_instruction
from hscaler.features.protocol_design.models import ProtocolRequest, ProtocolResponse
from hscaler.shared.models import ErrorResponse

if TYPE_CHECKING:
    from hscaler.scaling_service import ScalingService

logger = logging.getLogger(__name__)


def create_router(service: "ScalingService") -> APIRouter:
    """
    Create and configure FastAPI router with the protocol endpoint

    Args:
        service: ScalingService instance for handling requests

    Returns:
        Configured APIRouter
    """
    router = APIRouter(
        prefix="/protocol",
        tags=["protocol-design"],
        responses={
            400: {
                "description": "Bad Request - Inconsistent scaling spec",
                "model": ErrorResponse
            },
            422: {
                "description": "Unprocessable - Protocol rejected as unphysical or request invalid",
                "model": ErrorResponse
            }
        }
    )

    @router.post(
        "",
        description=load_instruction("instructions.md", __file__),
        response_model=ProtocolResponse,
    )
    def design_protocol(request: ProtocolRequest) -> ProtocolResponse:
        logger.info(f"Protocol request: mode={request.mode.value}, scale_factor={request.scale_factor:g}")
        response = service.design(request)
        logger.info(f"Protocol response: peak |omega^2| {response.peak_abs_omega2:.6g}")
        return response

    return router
