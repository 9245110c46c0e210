"""Exception hierarchy shared by all modules."""


class RMWaveError(Exception):
    """Base class for every error raised by the package."""


class DomainError(RMWaveError, ValueError):
    """Parameters or arguments outside the admissible domain."""


class SingularityError(RMWaveError, ZeroDivisionError):
    """Evaluation at the pole U = -1 of the Holling type II response."""


class IntegrationError(RMWaveError, RuntimeError):
    """Numerical failure inside the ODE integrator."""


class StiffnessError(IntegrationError):
    """Step size fell below the underflow floor."""


class DivergenceError(IntegrationError):
    """A non-finite state or derivative was produced."""


class GrazingError(IntegrationError):
    """A section crossing is (nearly) tangential."""


class NoReturnError(IntegrationError):
    """No return to a Poincare section before the time limit."""


class ConvergenceError(RMWaveError, RuntimeError):
    """An iterative search did not converge."""


class SpectralError(RMWaveError, RuntimeError):
    """No eigen-direction with the required properties."""


class ConfigurationError(RMWaveError, ValueError):
    """Inconsistent run configuration (CFL violation, failed search, ...)."""


class BlowUpError(RMWaveError, RuntimeError):
    """The PDE solution became non-finite."""

    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


class NotEstimableError(RMWaveError, ValueError):
    """A front speed cannot be extracted from the snapshots."""
