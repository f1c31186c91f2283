"""Exception types shared across the package."""


class ReachRlError(Exception):
    """Base class for all package-specific errors."""


class IntegrationOverflowError(ReachRlError):
    """Dynamics integration produced a non-finite state."""


class ConvergenceError(ReachRlError):
    """Fixed-point iteration exhausted its sweep budget.

    Carries the final sup-norm residual so callers can report how far
    the solve was from the requested tolerance.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class ConfigError(ReachRlError):
    """A run configuration failed validation; message names the field."""
