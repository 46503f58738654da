"""Exception types shared across the package.

Everything raised on purpose derives from JointrecError so callers can
catch one thing at the CLI boundary and map it to an exit code.
"""


class JointrecError(Exception):
    """Base class for all errors raised deliberately by this package."""


class ShapeError(JointrecError):
    """An array had the wrong rank, size, or channel layout."""


class ConfigError(JointrecError):
    """A configuration value is missing, unknown, or out of range."""


class DataError(JointrecError):
    """A data file is malformed, truncated, or has a bad magic/version."""


class NumericError(JointrecError):
    """A numeric invariant was violated (NaN/Inf loss, divergence)."""
