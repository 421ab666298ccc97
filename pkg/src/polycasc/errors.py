"""Exception types shared across the package."""


class PolycascError(Exception):
    """Base class for all package-specific errors."""


class BetaOutOfRange(PolycascError):
    """Inverse temperature outside the range where the cumulant is finite."""


class HorizonExceeded(PolycascError):
    """Requested time window does not fit inside the sampled field."""


class TooManyPaths(PolycascError):
    """Path enumeration would exceed the configured cap."""


class PathOutsideField(PolycascError):
    """Path visits a site outside the field's reachable cone."""


class TreeTooLarge(PolycascError):
    """Exact cascade evaluation would exceed the node cap."""


class EnumerationTooLarge(PolycascError):
    """Exact environment enumeration would exceed the configured cap."""


class TooManySpins(PolycascError):
    """Spin enumeration would exceed the configuration cap."""


class NegativeValues(PolycascError):
    """Batch contains negative values where nonnegativity is required."""


class NonPositiveValues(PolycascError):
    """Batch contains nonpositive values where positivity is required."""


class LengthMismatch(PolycascError):
    """Paths of different lengths cannot be compared."""


class SizeMismatch(PolycascError):
    """Spin configuration size does not match the model."""


class BadSpin(PolycascError):
    """Spin value outside {-1, +1}."""


class NonIncreasingBeta(PolycascError):
    """Beta levels must be strictly increasing."""


class UnreachableEndpoint(PolycascError):
    """Endpoint not reachable by the walk at the requested horizon."""
