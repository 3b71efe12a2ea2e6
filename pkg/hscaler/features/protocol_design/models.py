"""
Models for the Protocol Design feature

Request and response models for designing a frequency program.
"""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from hscaler.protocol import ScalingSpec, ValidationReport


# ============================================================================
# Request Models
# ============================================================================

class ProtocolRequest(ScalingSpec):
    """A scaling spec plus the size of the returned tabulation"""

    samples: int = Field(
        default=101,
        ge=0,
        le=10_001,
        description="Rows of the (s, t, u, udot, omega2) table to return; 0 returns none"
    )

    model_config = ConfigDict(
        frozen=True,
        extra="forbid",
        json_schema_extra={
            "example": {
                "mode": "momentum",
                "scale_factor": -1.0,
                "t_f": 1.0,
                "samples": 11
            }
        }
    )

    def to_spec(self) -> ScalingSpec:
        return ScalingSpec(**self.model_dump(exclude={"samples"}))


# ============================================================================
# Response Models
# ============================================================================

class ProtocolTable(BaseModel):
    """Uniform tabulation of the protocol"""

    s: List[float]
    t: List[float]
    u: List[float]
    udot: List[float]
    omega2: List[float]


class ProtocolResponse(BaseModel):
    """Designed reference trajectory, its frequency program and the validation verdict"""

    success: bool = Field(default=True)
    spec: ScalingSpec
    coefficients: List[float] = Field(..., description="u(s) coefficients, ascending powers of s = t/t_f")
    nodes: List[float] = Field(default_factory=list, description="Cancelled zeros of u, in s")
    peak_abs_omega2: float = Field(..., description="max_t |omega^2(t)|")
    peak_time: float = Field(..., description="Time of the peak")
    validation: ValidationReport
    table: Optional[ProtocolTable] = None
