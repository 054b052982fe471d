"""Shared exception types."""


class SemiwaveError(Exception):
    """Base class for all package errors."""


class EscapeError(SemiwaveError):
    """A trajectory left the configured phase-space box."""

    def __init__(self, message, escape_time=None):
        super().__init__(message)
        self.escape_time = escape_time


class CausticError(SemiwaveError):
    """The central frame determinant |det M| fell below threshold."""


class ProjectabilityError(SemiwaveError):
    """A manifold graph lost projectability onto its y coordinate."""


class CoverageError(SemiwaveError):
    """A grid does not cover the effective support of a state."""


class NonConvergenceError(SemiwaveError):
    """An iterative estimate failed its convergence criterion."""


class DegenerateHyperbolicityError(SemiwaveError):
    """Transverse expansion too close to neutral to extract a splitting."""


class ConfigError(SemiwaveError):
    """Invalid experiment configuration."""
