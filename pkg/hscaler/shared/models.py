"""
Response envelopes shared by the hscaler endpoints

Feature-specific request and response bodies live with their feature.
"""

from datetime import datetime, timezone
from typing import Any, Dict, Optional

from pydantic import BaseModel, Field, ConfigDict

UTC = timezone.utc


def utc_timestamp() -> str:
    return datetime.now(UTC).isoformat()


# ============================================================================
# Errors
# ============================================================================

class ErrorDetail(BaseModel):
    """Domain error as reported to REST clients"""

    message: str = Field(..., description="Human-readable reason")
    error_code: Optional[str] = Field(None, description="Stable code, e.g. GENUINE_SINGULARITY")
    details: Optional[Any] = Field(None, description="Structured context (node position, offending key, ...)")

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "message": "u(s) vanishes at s=0.5 but ü does not vanish to order 1 there",
                "error_code": "GENUINE_SINGULARITY",
                "details": {"s": 0.5, "multiplicity": 1}
            }
        }
    )


class ErrorResponse(BaseModel):
    success: bool = Field(default=False)
    error: ErrorDetail
    timestamp: str = Field(default_factory=utc_timestamp, description="UTC time the error was raised")


# ============================================================================
# Service metadata
# ============================================================================

class HealthResponse(BaseModel):
    """Health check response body"""

    success: bool = Field(default=True)
    status: str = Field(default="ok")
    service: str = Field(default="hscaler")
    version: str = Field(..., description="Package version")
    compute_threads: Optional[int] = Field(None, description="Worker thread cap of the running service")
    timestamp: str = Field(default_factory=utc_timestamp)


class ServiceInfo(BaseModel):
    """Body of GET /"""

    name: str = Field(default="hscaler")
    version: str = Field(..., description="Package version")
    description: str = Field(..., description="What the service computes")
    units: str = Field(..., description="Unit conventions of the inputs and outputs")
    endpoints: Dict[str, str] = Field(..., description="Route -> method and path")
