"""
Exception hierarchy for hscaler

Every error carries the process exit code the CLI uses for it and an
error code string used by the REST layer.
"""

from typing import Any, Dict, Optional


class HScalerError(Exception):
    """Base class for all hscaler errors"""

    exit_code: int = 1
    error_code: str = "HSCALER_ERROR"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ConfigurationError(HScalerError, ValueError):
    """Invalid scaling spec, grid, initial state or run document"""

    exit_code = 1
    error_code = "CONFIGURATION_ERROR"


class GenuineSingularity(HScalerError):
    """A zero of u(s) in [0, 1] that is not matched by a zero of ü(s)"""

    exit_code = 2
    error_code = "GENUINE_SINGULARITY"


class ProtocolValidationFailed(HScalerError):
    """A designed protocol failed its boundary or residual checks"""

    exit_code = 2
    error_code = "PROTOCOL_VALIDATION_FAILED"


class NumericalError(HScalerError):
    """Base class for numerical failures"""

    exit_code = 3
    error_code = "NUMERICAL_ERROR"


class IntegratorFailure(NumericalError):
    """The fundamental-solution ODE did not meet its tolerance"""

    error_code = "INTEGRATOR_FAILURE"


class SingularIntegrand(NumericalError):
    """u (or u̇) vanishes inside a quadrature interval"""

    error_code = "SINGULAR_INTEGRAND"


class MirrorNode(NumericalError):
    """Invariant eigenfunctions requested where the reference trajectory vanishes"""

    error_code = "MIRROR_NODE"


class GridTooSmall(ConfigurationError):
    """Wave packet support does not fit inside the spatial or momentum grid"""

    error_code = "GRID_TOO_SMALL"


class BadCovariance(ConfigurationError):
    """Covariance is not positive definite or violates the uncertainty floor"""

    error_code = "BAD_COVARIANCE"


class StabilityWarning(UserWarning):
    """Wave packet probability has reached the grid boundary (aliasing risk)"""


def exit_code_for(exc: BaseException) -> int:
    """CLI exit code for an exception (1 for anything unexpected in config handling)"""
    if isinstance(exc, HScalerError):
        return exc.exit_code
    return 1
