"""Exception types shared across the package."""


class StfeError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(StfeError, ValueError):
    """Invalid or inadmissible run configuration."""


class NyquistError(StfeError, ValueError):
    """Requested spectral mode is not resolved by the grid."""


class NonpositiveFieldError(StfeError, ValueError):
    """Operation requires a strictly positive (or nonnegative) field."""


class AllSamplesFailedError(StfeError, RuntimeError):
    """Every trajectory of an ensemble failed."""
