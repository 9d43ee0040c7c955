"""
Utility modules for the interaction-free detection simulator
"""
from .errors import (
    IFDError,
    ValidationError,
    ConfigurationError,
    DomainError,
    NumericalError,
    GoldenMismatchError,
)
from .logger import get_logger, setup_logging, RunLogger
from .validators import (
    validate_positive_integer,
    validate_finite,
    validate_non_negative,
    validate_probability,
    validate_range,
    validate_enum,
)
from .formatters import (
    build_header,
    write_artifact,
    read_artifact,
    format_error_response,
    format_json_response,
)

__all__ = [
    "IFDError",
    "ValidationError",
    "ConfigurationError",
    "DomainError",
    "NumericalError",
    "GoldenMismatchError",
    "get_logger",
    "setup_logging",
    "RunLogger",
    "validate_positive_integer",
    "validate_finite",
    "validate_non_negative",
    "validate_probability",
    "validate_range",
    "validate_enum",
    "build_header",
    "write_artifact",
    "read_artifact",
    "format_error_response",
    "format_json_response",
]
