"""Exception types raised across the package."""


class SplineFilError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(SplineFilError, ValueError):
    pass


class DomainError(SplineFilError, ValueError):
    pass


class UnsupportedDerivativeError(SplineFilError, ValueError):
    pass


class DataError(SplineFilError, ValueError):
    pass


class NumericalError(SplineFilError, ArithmeticError):
    pass


class EstimationError(SplineFilError, ValueError):
    """A quantity could not be estimated from the given inputs."""


class EmptySetError(SplineFilError, ValueError):
    pass


class ConfigError(SplineFilError, ValueError):
    pass
