"""Exception hierarchy shared by all pipeline stages."""


class SsiError(Exception):
    """Base class for errors raised by ssikit."""


class ValidationError(SsiError, ValueError):
    """Input data violates a precondition (maps to CLI exit code 1)."""


class ConfigError(ValidationError):
    """Bad or incomplete configuration, e.g. a column missing from the census header."""


class RowError(ValidationError):
    """A single census row failed to parse or validate."""

    def __init__(self, row_number, message):
        self.row_number = row_number
        super().__init__(f"row {row_number}: {message}")


class SingularMatrixError(ValidationError):
    """Correlation matrix cannot be inverted."""


class NotFactorableError(ValidationError):
    """Data carry no usable common factor."""
