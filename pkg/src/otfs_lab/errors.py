"""Exception types raised across the package."""


class OtfsLabError(Exception):
    """Base class for package errors."""


class ResourceLimitError(OtfsLabError):
    """A requested object would exceed a configured size budget."""


class PreconditionError(OtfsLabError, ValueError):
    """Inputs are individually valid but violate an operation's precondition."""


class NumericalError(OtfsLabError, ArithmeticError):
    """A linear system is singular or too ill-conditioned to solve."""


class ConfigError(OtfsLabError, ValueError):
    """An experiment configuration is invalid or cannot be run."""
