"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class LogitblendError(Exception):
    """Base class for all package errors."""


class ConfigError(LogitblendError):
    """Invalid parameters, options or configuration."""


class DataError(LogitblendError):
    """Malformed, degenerate or inconsistent input data."""


class NumericalError(LogitblendError):
    """Optimization or linear-algebra breakdown."""
