"""
Core infrastructure shared across projects

Reusable components that know nothing about the physics: configuration
base classes, atomic dataset writers, and the MCP/REST server base.
"""

from .config import (
    BaseComputeConfig,
    BaseOutputConfig,
    BaseServerConfig,
)

from .datasets import (
    DatasetWriter,
    config_hash,
    read_csv,
)

from .server import (
    BaseMCPServer,
    BaseService,
    ServerMode,
    add_server_arguments,
    apply_cli_args_to_environment,
    configure_logging,
)
