"""Domain exceptions shared across the toolkit.

Every error raised by kpidyn for a *domain* reason (bad matrix, query
outside a tabulated box, solver breakdown, ...) derives from KpidynError
so callers -- the CLI in particular -- can separate them from bugs.
"""


class KpidynError(Exception):
    """Base class for all domain errors."""


class DimensionMismatch(KpidynError):
    """Vector/matrix dimensions are inconsistent with the model."""


class OutOfDomain(KpidynError):
    """Query outside the box of a tabulated gain function."""


class NotSymmetric(KpidynError):
    """Matrix expected to be symmetric is not."""


class NotPositiveDefinite(KpidynError):
    """Matrix expected to be positive definite has a non-positive eigenvalue."""


class NoConvergence(KpidynError):
    """Iterative solver hit its iteration cap; carries the best residual seen."""

    def __init__(self, message: str, best_residual: float | None = None):
        super().__init__(message)
        self.best_residual = best_residual


class Degenerate(KpidynError):
    """Boundary-value system is singular (conjugate-point configuration)."""


class DegenerateInterval(Degenerate):
    """Closed-form harmonic fit is non-unique: omega*(t2-t1) is a multiple of pi."""


class ZeroFrequency(KpidynError):
    """Per-mode operation requested for a mode with (numerically) zero frequency."""


class InvalidStep(KpidynError):
    """Time step violates the sampling bound of the integrator."""


class FitFailed(KpidynError):
    """Envelope fit residual too large for the returned exponent to be trusted."""


class InvalidFormat(KpidynError):
    """Input file does not match the documented schema."""
