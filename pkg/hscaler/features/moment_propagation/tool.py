"""
Moment Propagation Tool Implementation

Provides the propagate_moments tool through the MCP protocol.
"""

import logging
from typing import TYPE_CHECKING, Any, Dict, List, Optional

from fastmcp import FastMCP

from core.utils import inject_docstring, load_instruction
from hscaler.config import InitialStateConfig
from hscaler.features.moment_propagation.models import MomentsRequest
from hscaler.protocol import ScalingSpec

if TYPE_CHECKING:
    from hscaler.scaling_service import ScalingService

logger = logging.getLogger(__name__)


def register_tool(mcp: FastMCP, service: "ScalingService") -> None:
    """
    Register the propagate_moments tool with the MCP server

    Args:
        mcp: FastMCP server instance
        service: ScalingService instance doing the computation
    """
    @mcp.tool()
    @inject_docstring(lambda: load_instruction("instructions.md", __file__))
    def propagate_moments(
        scale_factor: float,
        mode: str = "momentum",
        t_f: float = 1.0,
        q_mean: float = 1.0,
        p_mean: float = 1.0,
        sigma_q: float = 2 ** -0.5,
        sigma_p: Optional[float] = None,
        cov_qp: float = 0.0,
        times: Optional[List[float]] = None,
        intervals: int = 12
    ) -> Dict[str, Any]:
        logger.info(f"MCP tool called: propagate_moments(mode={mode}, scale_factor={scale_factor}, t_f={t_f})")
        request = MomentsRequest(
            spec=ScalingSpec(mode=mode, scale_factor=scale_factor, t_f=t_f),
            initial_state=InitialStateConfig(
                q_mean=q_mean, p_mean=p_mean, sigma_q=sigma_q, sigma_p=sigma_p, cov_qp=cov_qp
            ),
            times=times,
            intervals=intervals,
        )
        response = service.propagate(request)
        logger.info(f"MCP tool completed: propagate_moments -> ratio {response.scaling.observed_ratio}")
        return response.model_dump(mode="json")
