class Error(Exception):
    """Base class for exceptions in this package."""

    exit_code = 1

    def __init__(self, message):
        self.message = message
        super().__init__(message)


class ConfigError(Error):
    """Exception raised for malformed or unknown experiment configuration"""

    exit_code = 2


class DomainError(Error, ValueError):
    """Exception raised when an argument lies outside an operation's domain"""

    exit_code = 2


class OrderRangeError(DomainError):
    """Bessel order above the supported range"""


class InvalidHarmonicError(DomainError):
    """Harmonic index not valid for the ambient sphere"""


class EmptyConfigurationError(DomainError):
    """Point configuration with no points"""


class GridMismatchError(DomainError):
    """Two sampled objects do not share the same grid"""


class ZeroDenominatorError(DomainError):
    """Quotient requested with a vanishing denominator"""


class NumericalResolutionError(Error):
    """Exception raised when a grid, step or quadrature cannot resolve the
    requested quantity (coarse steps, aliasing, exhausted panel budgets)"""

    exit_code = 3


class InvariantViolation(Error):
    """Exception raised when a verification experiment observes a violated
    inequality or identity

    Attributes:
        criterion -- name of the failed check
        message -- explanation of the failure
    """

    exit_code = 4

    def __init__(self, criterion, message):
        self.criterion = criterion
        super().__init__(f"{criterion}: {message}")
