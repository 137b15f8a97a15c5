"""Error taxonomy shared by the library, service and CLI.

Exit-code mapping used by the CLI: ValidationError -> 1, NumericError -> 2,
IoError -> 3.
"""


class CkstnError(Exception):
    """Base class for all library errors."""

    exit_code = 1
    kind = "error"


class ValidationError(CkstnError):
    """Bad shapes, bad configuration, bad input values."""

    exit_code = 1
    kind = "validation"


class DimensionError(ValidationError):
    """Shape mismatch between operands."""

    kind = "validation"


class ConfigError(ValidationError):
    """Invalid configuration value or combination."""

    kind = "validation"


class NumericError(CkstnError):
    """Non-finite value produced where finiteness is required."""

    exit_code = 2
    kind = "numeric"


class IoError(CkstnError):
    """File format or filesystem failure."""

    exit_code = 3
    kind = "io"
