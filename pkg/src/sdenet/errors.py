"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, data problems with 3, numerical failures with 4.
"""


class SdenetError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(SdenetError):
    """Invalid configuration, arguments, or option combinations."""

    exit_code = 2


class DataError(SdenetError):
    """Malformed, inconsistent, or missing input data."""

    exit_code = 3


class NumericError(SdenetError):
    """Numerical failure (non-PSD matrix, failed factorization, ...)."""

    exit_code = 4


class GridError(DataError):
    """Measurement times incompatible with a uniform refinement grid."""
