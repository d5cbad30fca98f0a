"""Exception types shared across the package."""


class IsrfdError(Exception):
    """Base class for package errors."""


class ConfigError(IsrfdError, ValueError):
    """Invalid scenario or detector configuration."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class NumericalError(IsrfdError, ArithmeticError):
    """An iterative or quadrature routine failed to converge."""


class DegenerateGeometryError(NumericalError):
    """Geometry too degenerate for the requested statistic."""
