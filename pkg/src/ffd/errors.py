"""Exception types shared across the package.

Each family maps to one CLI exit code (see :mod:`ffd.cli`).
"""


class FFDError(Exception):
    """Base class for every error raised on purpose by this package."""


class ConfigError(FFDError, ValueError):
    """Invalid configuration value or inconsistent model geometry."""


class DimensionError(ConfigError):
    """A tensor extent does not match what an operation requires."""

    def __init__(self, message, axis=None, expected=None, got=None):
        details = []
        if axis is not None:
            details.append(f"axis={axis}")
        if expected is not None:
            details.append(f"expected={expected}")
        if got is not None:
            details.append(f"got={got}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
        self.axis = axis
        self.expected = expected
        self.got = got


class DataError(FFDError):
    """Dataset files are missing, malformed or inconsistent."""


class NumericalError(FFDError, ArithmeticError):
    """Non-finite values or a failed numerical check."""
