"""Exception hierarchy shared across the package.

The split mirrors the CLI exit codes: configuration problems (exit 2),
data problems (exit 3) and numerical failures (exit 4).
"""


class SemstatsError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SemstatsError):
    """Invalid configuration value or unparseable config file."""


class DataError(SemstatsError):
    """Invalid, inconsistent or insufficient input data."""


class NumericalError(SemstatsError):
    """Numerical failure (NaN/Inf encountered, divergence)."""
