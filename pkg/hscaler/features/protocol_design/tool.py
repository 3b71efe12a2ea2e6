"""
Protocol Design Tool Implementation

Provides the design_protocol tool through the MCP protocol.
"""

import logging
from typing import TYPE_CHECKING, Any, Dict

from fastmcp import FastMCP

from core.utils import inject_docstring, load_instruction
from hscaler.features.protocol_design.models import ProtocolRequest

if TYPE_CHECKING:
    from hscaler.scaling_service import ScalingService

logger = logging.getLogger(__name__)


def register_tool(mcp: FastMCP, service: "ScalingService") -> None:
    """
    Register the design_protocol tool with the MCP server

    Args:
        mcp: FastMCP server instance
        service: ScalingService instance doing the computation
    """
    @mcp.tool()
    @inject_docstring(lambda: load_instruction("instructions.md", __file__))
    def design_protocol(
        scale_factor: float,
        mode: str = "momentum",
        t_f: float = 1.0,
        u0: float = 1.0,
        udot0: float = 1.0,
        samples: int = 101
    ) -> Dict[str, Any]:
        logger.info(f"MCP tool called: design_protocol(mode={mode}, scale_factor={scale_factor}, t_f={t_f})")
        request = ProtocolRequest(
            mode=mode,
            scale_factor=scale_factor,
            t_f=t_f,
            u0=u0,
            udot0=udot0,
            samples=samples,
        )
        response = service.design(request)
        logger.info(
            f"MCP tool completed: design_protocol -> peak |omega^2| {response.peak_abs_omega2:.6g}, "
            f"passed={response.validation.passed}"
        )
        return response.model_dump(mode="json")
