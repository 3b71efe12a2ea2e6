"""
Configuration management for hscaler

Two layers: AppConfig holds process-wide settings from the environment
(thread cap, output directory, service surface), RunConfig is the JSON run
document a CLI command executes. Extends core configuration classes.
"""

import json
import math
import os
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.config import (
    BaseComputeConfig,
    BaseOutputConfig,
    BaseServerConfig,
    load_dotenv
)
from hscaler.errors import ConfigurationError
from hscaler.moments import MomentState
from hscaler.protocol import ScalingSpec
from hscaler.qsim import GridSpec

# Ensure environment variables are loaded
load_dotenv()

ENV_PREFIX = "HSCALER_"


class ComputeConfig(BaseComputeConfig):
    """Thread cap for FFTs and ensemble chunks (HSCALER_THREADS)"""

    @classmethod
    def from_env(cls) -> "ComputeConfig":
        return super().from_env(env_prefix=ENV_PREFIX)


class OutputConfig(BaseOutputConfig):
    """Default dataset directory (HSCALER_OUTPUT_DIR)"""

    @classmethod
    def from_env(cls) -> "OutputConfig":
        return super().from_env(env_prefix=ENV_PREFIX)


class ServerConfig(BaseServerConfig):
    """
    hscaler service configuration

    Controls how `hscaler serve` listens for connections and operational mode.
    """
    transport: Literal["stdio", "http"] = Field(
        default="stdio",
        description="Transport mode: 'stdio' for direct MCP, 'http' for web server"
    )
    cors_origins: list[str] = Field(
        default=["http://localhost:3000", "http://localhost:8080"],
        description="List of allowed origins for CORS"
    )

    @classmethod
    def from_env(cls) -> "ServerConfig":
        """Load server configuration from HSCALER_* environment variables"""
        config = super().from_env(env_prefix=ENV_PREFIX)
        origins = os.getenv(f"{ENV_PREFIX}CORS_ORIGINS")
        if origins:
            config.cors_origins = [origin.strip() for origin in origins.split(",") if origin.strip()]
        return config


class AppConfig(BaseModel):
    """
    Complete application configuration

    Aggregates all configuration sections into a single object.
    """
    server: ServerConfig
    compute: ComputeConfig
    output: OutputConfig

    @classmethod
    def from_env(cls) -> "AppConfig":
        """Load complete configuration from environment variables"""
        return cls(
            server=ServerConfig.from_env(),
            compute=ComputeConfig.from_env(),
            output=OutputConfig.from_env(),
        )

    def validate_for_transport(self) -> None:
        """
        Validate configuration is complete for the selected transport mode

        Raises:
            ValueError: If the combination of settings cannot be served
        """
        if self.server.transport == "stdio" and not self.server.mcp_only:
            # REST needs HTTP; stdio always runs MCP-only
            self.server.mcp_only = True


# Global configuration instance (loaded lazily)
_config: Optional[AppConfig] = None


def get_config() -> AppConfig:
    """
    Get global application configuration

    Loads configuration on first access and caches it.
    Call load_config() explicitly if you need to reload.
    """
    global _config
    if _config is None:
        _config = AppConfig.from_env()
    return _config


def load_config(validate: bool = True) -> AppConfig:
    """
    Load application configuration from environment

    Args:
        validate: If True, validate configuration for transport mode

    Returns:
        AppConfig: Complete application configuration
    """
    global _config
    _config = AppConfig.from_env()
    if validate:
        _config.validate_for_transport()
    return _config


# ============================================================================
# Run documents
# ============================================================================

_FORBID = ConfigDict(extra="forbid")


class InitialStateConfig(BaseModel):
    """
    Gaussian initial state

    sigma_p defaults to the minimum-uncertainty value ħ/(2σ_q). The wave-packet
    commands accept only the minimum-uncertainty state.
    """
    q_mean: float = 1.0
    p_mean: float = 1.0
    sigma_q: float = Field(default=2 ** -0.5, gt=0)
    sigma_p: Optional[float] = Field(default=None, gt=0)
    cov_qp: float = 0.0

    model_config = _FORBID

    def to_moments(self, hbar: float = 1.0) -> MomentState:
        return MomentState.gaussian(
            self.q_mean, self.p_mean, self.sigma_q, self.sigma_p, self.cov_qp, hbar=hbar
        )


class EnsembleConfig(BaseModel):
    n: int = Field(default=100_000, ge=1, description="Number of classical points")
    seed: int = Field(default=0, ge=0, description="Root seed of the chunk substreams")
    verlet_dt: Optional[float] = Field(default=1e-3, gt=0, description="Verlet step for the oracle comparison (None skips it)")

    model_config = _FORBID


class OutputsConfig(BaseModel):
    directory: Optional[Path] = Field(default=None, description="Overrides HSCALER_OUTPUT_DIR")
    snapshots: int = Field(default=12, ge=1, description="Equal intervals between snapshots")
    samples: int = Field(default=1001, ge=2, description="Rows in protocol and moments tables")
    wigner_oversample: int = Field(default=2, ge=2)
    q_window: Optional[Tuple[float, float]] = None
    p_window: Optional[Tuple[float, float]] = None
    write_ensembles: bool = Field(default=True, description="Write per-snapshot ensemble point tables")

    model_config = _FORBID


class SweepConfig(BaseModel):
    t_f: List[float] = Field(
        default_factory=lambda: [10 ** (k / 4) for k in range(-4, 5)],
        description="Process times to sweep"
    )
    scale_factors: Optional[List[float]] = Field(
        default=None, description="Scale factors to sweep (defaults to the run's scale_factor)"
    )

    model_config = _FORBID

    @field_validator("t_f")
    @classmethod
    def validate_times(cls, v: List[float]) -> List[float]:
        if any(not math.isfinite(t) or t <= 0 for t in v):
            raise ValueError("sweep t_f values must be positive and finite")
        return v


class ValidationConfig(BaseModel):
    excursion: bool = Field(default=True, description="Report max |<q>_t| for the initial state")

    model_config = _FORBID


class RunConfig(BaseModel):
    """A complete run document; unknown keys are rejected at every level"""

    spec: ScalingSpec
    grid: GridSpec = Field(default_factory=GridSpec)
    initial_state: InitialStateConfig = Field(default_factory=InitialStateConfig)
    ensemble: EnsembleConfig = Field(default_factory=EnsembleConfig)
    outputs: OutputsConfig = Field(default_factory=OutputsConfig)
    sweep: Optional[SweepConfig] = None
    validation: ValidationConfig = Field(default_factory=ValidationConfig)

    model_config = _FORBID

    @model_validator(mode="after")
    def validate_initial_state(self) -> "RunConfig":
        self.initial_state.to_moments(self.spec.hbar).quantum_admissible(self.spec.hbar)
        return self

    def with_overrides(self, out: Optional[Path] = None, seed: Optional[int] = None) -> "RunConfig":
        """Apply --out and --seed"""
        update = {}
        if out is not None:
            update["outputs"] = self.outputs.model_copy(update={"directory": Path(out)})
        if seed is not None:
            update["ensemble"] = self.ensemble.model_copy(update={"seed": seed})
        return self.model_copy(update=update) if update else self


def load_run_config(path: Path) -> RunConfig:
    """
    Read and validate a JSON run document

    Raises:
        ConfigurationError: If the file is unreadable, not JSON, or fails validation
    """
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"Cannot read run document {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"Run document {path} is not valid JSON: {exc}") from exc
    return parse_run_config(document, source=str(path))


def parse_run_config(document: dict, source: str = "<document>") -> RunConfig:
    try:
        return RunConfig.model_validate(document)
    except ValidationError as exc:
        raise ConfigurationError(
            f"Invalid run document {source}: {exc.error_count()} error(s)",
            details={"errors": exc.errors(include_url=False, include_context=False)},
        ) from exc
