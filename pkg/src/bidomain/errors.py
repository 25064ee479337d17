"""Exception types shared across the package."""


class BidomainError(Exception):
    """Base class for all package-specific failures."""


class AssemblyError(BidomainError):
    """Raised when a matrix cannot be assembled (e.g. degenerate element)."""


class NumericalDegeneracyError(BidomainError):
    """Raised when a tensor or matrix is too close to singular to invert."""


class OracleError(BidomainError):
    """Raised by the dense reference computations (size guard, rank checks)."""


class PreconditionerError(BidomainError):
    """Raised when a preconditioner cannot be constructed."""


class NonConvergenceError(BidomainError):
    """Iterative solve exceeded its iteration budget.

    Carries the partial solve statistics in ``stats``.
    """

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


class NumericalBreakdownError(BidomainError):
    """NaN or Inf appeared inside an iterative solve."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


class ConfigError(BidomainError):
    """Invalid or malformed run configuration."""
