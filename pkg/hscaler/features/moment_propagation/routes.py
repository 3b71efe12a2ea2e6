"""
Moment Propagation Routes Module

Defines the FastAPI endpoint for moment propagation.
"""

import logging
from typing import TYPE_CHECKING

from fastapi import APIRouter

from core.utils import load_instruction
from hscaler.features.moment_propagation.models import MomentsRequest, MomentsResponse
from hscaler.shared.models import ErrorResponse

if TYPE_CHECKING:
    from hscaler.scaling_service import ScalingService

logger = logging.getLogger(__name__)


def create_router(service: "ScalingService") -> APIRouter:
    """
    Create and configure FastAPI router with the moments endpoint

    Args:
        service: ScalingService instance for handling requests

    Returns:
        Configured APIRouter
    """
    router = APIRouter(
        prefix="/moments",
        tags=["moment-propagation"],
        responses={
            400: {
                "description": "Bad Request - Times outside [0, t_f] or inadmissible initial state",
                "model": ErrorResponse
            },
            422: {
                "description": "Unprocessable - Protocol rejected or numerical failure",
                "model": ErrorResponse
            }
        }
    )

    @router.post(
        "",
        description=load_instruction("instructions.md", __file__),
        response_model=MomentsResponse,
    )
    def propagate_moments(request: MomentsRequest) -> MomentsResponse:
        logger.info(
            f"Moments request: mode={request.spec.mode.value}, scale_factor={request.spec.scale_factor:g}"
        )
        return service.propagate(request)

    return router
