"""Exception types raised across the package."""


class IphsError(Exception):
    """Base class for all package errors."""


class InvalidStateError(IphsError, ValueError):
    """A state lies outside the model domain or is not finite."""


class ConfigurationError(IphsError, ValueError):
    """Invalid parameters, weights or scenario configuration."""


class DimensionError(IphsError, ValueError):
    pass


class ProjectionError(IphsError):
    """The least-distance projection onto the equilibrium set did not converge."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class IntegrationAbort(IphsError):
    """The integrated state left the model domain."""

    def __init__(self, message, t_last, x_last):
        super().__init__(message)
        self.t_last = t_last
        self.x_last = x_last


class StiffnessError(IphsError):
    """Step size underflow in the time integrator."""


class ModelEvaluationError(IphsError, FloatingPointError):
    """A model function returned NaN or inf."""


class InfeasibleConstructionError(IphsError):
    """A three-phase control failed to steer the state as required."""

    def __init__(self, message, misses):
        super().__init__(f"{message}: {misses}")
        self.misses = misses
