"""
Models for the Moment Propagation feature

Request and response models for propagating Gaussian moments through a
designed protocol.
"""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from hscaler.config import InitialStateConfig
from hscaler.protocol import ScalingSpec


# ============================================================================
# Request Models
# ============================================================================

class MomentsRequest(BaseModel):
    """Protocol, initial Gaussian state and output times"""

    spec: ScalingSpec
    initial_state: InitialStateConfig = Field(default_factory=InitialStateConfig)
    times: Optional[List[float]] = Field(
        default=None,
        description="Times in [0, t_f]; defaults to `intervals` equal intervals"
    )
    intervals: int = Field(default=12, ge=1, le=10_000)

    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "spec": {"mode": "momentum", "scale_factor": 0.2, "t_f": 1.0},
                "initial_state": {"q_mean": 1.0, "p_mean": 1.0, "sigma_q": 0.7071067811865476},
                "intervals": 12
            }
        }
    )

    @field_validator("times")
    @classmethod
    def validate_times(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None and not v:
            raise ValueError("times must not be empty")
        return v


# ============================================================================
# Response Models
# ============================================================================

class MomentRow(BaseModel):
    """Moments and invariants at one time"""

    t: float
    q_mean: float
    p_mean: float
    var_q: float
    var_p: float
    cov_qp: float
    G_mean: float
    I_mean: float
    kinetic_energy: float


class ScalingCheck(BaseModel):
    """Observed final-to-initial ratio against the designed scale factor"""

    quantity: str = Field(..., description="'p_mean' (momentum mode) or 'q_mean' (position mode)")
    expected_ratio: float
    observed_ratio: Optional[float] = Field(None, description="None when the initial value is zero")
    invariant_drift: float = Field(..., description="max relative drift of <G> and <I>")


class MomentsResponse(BaseModel):
    success: bool = Field(default=True)
    spec: ScalingSpec
    rows: List[MomentRow]
    scaling: ScalingCheck
