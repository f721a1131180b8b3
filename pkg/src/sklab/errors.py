"""Exception types shared across the package."""


class SklabError(Exception):
    """Base class for all package errors."""


class GridError(SklabError, ValueError):
    """Invalid grid parameters, or a grid too small for an operator."""


class GridMismatchError(SklabError, ValueError):
    """Two fields live on different grids."""


class ModelOnlyError(SklabError):
    """A model-only catalog entry was passed to a PDE residual check."""


class ExponentConstraintError(SklabError, ValueError):
    """Requested exponent violates beta < n+1."""


class NegativeDensityError(SklabError, ValueError):
    """The curvature density rho = |dh + a phi|^2 was negative somewhere."""


class OrderMismatchError(SklabError):
    """The declared order of the cubic form is inconsistent with the data."""


class InconclusiveClassification(SklabError):
    """Neither asymptotic model fits the radial profile."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
