"""Exception hierarchy shared across ospkit modules."""


class OspkitError(Exception):
    """Base class for all ospkit errors."""


class DimensionError(OspkitError, ValueError):
    """Matrix or vector dimensions are inconsistent."""


class DomainError(OspkitError, ValueError):
    """An argument lies outside the function's domain (NaN, nonpositive, ...)."""


class OrderingError(OspkitError, ValueError):
    """Time arguments violate the required ordering (e.g. s > t)."""


class ConfigError(OspkitError, ValueError):
    """Invalid experiment configuration or missing required data."""


class NumericError(OspkitError, ArithmeticError):
    """A numerical procedure failed beyond recovery (e.g. factorization)."""
