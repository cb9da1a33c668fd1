"""Exception types shared across the package."""


class TvsimError(Exception):
    """Base class for all package errors."""


class ConfigError(TvsimError):
    """Invalid or inconsistent configuration input."""


class SolverError(TvsimError):
    """Linear solver failed to converge.

    Carries the final relative residual and iteration count.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class StepError(TvsimError):
    """A time step could not be completed (guard or positivity failure)."""

    def __init__(self, message, node=None, dt=None):
        super().__init__(message)
        self.node = node
        self.dt = dt


class AdmissibilityError(TvsimError):
    """Initial data rejected before any stepping."""
