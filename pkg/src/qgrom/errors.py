"""Exception types raised across the toolkit."""


class QgromError(Exception):
    """Base class for all toolkit errors."""


class DomainError(QgromError, ValueError):
    """Input lies outside the domain where an operation is defined."""


class ShapeError(QgromError, ValueError):
    """Array dimensions are inconsistent."""


class ConfigurationError(QgromError, ValueError):
    """A parameter set or config file is invalid."""


class NumericError(QgromError, ArithmeticError):
    """Non-finite values, non-convergence or similar numerical failure."""


class CFLError(NumericError):
    """Advective Courant number exceeded the allowed bound."""


class DependencyError(QgromError, FileNotFoundError):
    """A pipeline stage is missing an upstream artifact."""


class ManifestError(QgromError, ValueError):
    """An upstream manifest does not match the current configuration."""
