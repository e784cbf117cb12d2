"""Exception hierarchy shared by all qbd2d modules."""


class QBDError(Exception):
    """Base class for every error raised by qbd2d."""


class ModelError(QBDError, ValueError):
    """Malformed, inconsistent or non-stochastic model input."""


class DomainError(QBDError, ValueError):
    """A parameter lies outside the interval where the quantity exists."""


class ConvergenceError(QBDError, RuntimeError):
    """An iterative solver hit its iteration cap.

    The best iterate and its residual are attached so callers can decide
    whether a partial result is usable.
    """

    def __init__(self, message, partial=None, residual=None):
        super().__init__(message)
        self.partial = partial
        self.residual = residual


class DegenerateGeometryError(QBDError, ValueError):
    """The region where the spectral radius is at most one collapsed to a point."""
