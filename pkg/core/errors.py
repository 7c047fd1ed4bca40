"""
Exception hierarchy for the restriction laboratory.
"""


class RestrictionLabError(Exception):
    """
    Base class for every error raised by the laboratory.
    """


class NotInvertible(RestrictionLabError, ValueError):
    """Raised when gcd(x, q) > 1 and no modular inverse exists."""


class EvenModulus(RestrictionLabError, ValueError):
    """Raised when an odd modulus is required."""


class EmptyRange(RestrictionLabError, ValueError):
    """Raised when an integer range has hi < lo."""


class NoSquareRoot(RestrictionLabError, ValueError):
    """Raised when a residue has no (nonzero) square root modulo a prime."""


class BudgetExceeded(RestrictionLabError):
    """Raised when a computation would exceed its configured size budget."""


class QuadratureNotConverged(RestrictionLabError):
    """
    Raised when adaptive quadrature fails to reach the requested tolerance.
    """
    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class WindowTooSmall(RestrictionLabError):
    """Raised when a truncated Poisson window leaves a tail above tolerance."""


class InsufficientNodes(RestrictionLabError, ValueError):
    """Raised when a uniform grid is too coarse to integrate exactly."""


class EmptyModuli(RestrictionLabError):
    """Raised when a mollifier has no admissible moduli."""


class EmptyShell(RestrictionLabError, ValueError):
    """Raised when a construction needs a nonempty lattice shell."""


class DegenerateFit(RestrictionLabError, ValueError):
    """Raised when a log-log fit has too few or repeated abscissae."""


class EmptyShellInGrid(RestrictionLabError):
    """Raised (and usually caught with a warning) for empty shells in a sweep."""
    def __init__(self, n, lam):
        super().__init__(f"Empty shell F_{{{n},{lam}}} in lambda grid")
        self.n = n
        self.lam = lam


class UsageError(RestrictionLabError, ValueError):
    """Raised for invalid command-line or configuration values."""


class ParseError(RestrictionLabError, ValueError):
    """
    Raised when a configuration file cannot be parsed.
    """
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class AcceptanceFailure(RestrictionLabError):
    """Raised when an acceptance check finishes with a failing verdict."""
