"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or mismatched dimensions.

    Carries the offending field name when known, so command-line
    diagnostics can point at the exact key.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericError(ArithmeticError):
    """Non-finite value encountered where a finite one is required."""


class CsvFormatError(ValueError):
    """Malformed CSV input; ``line`` is the 1-based offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
