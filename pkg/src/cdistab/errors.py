"""Exception hierarchy for the toolkit."""


class CdistabError(Exception):
    """Base class for all toolkit errors."""


class DomainError(CdistabError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class UsageError(CdistabError):
    """An API was called inconsistently (wrong tag, too few samples, ...)."""


class NotControllableError(DomainError):
    """The driven block of the input vector is zero, so no feedback can work."""


class InvalidSaturationError(CdistabError):
    """A candidate saturation function produced non-finite values."""


class QuadratureError(CdistabError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved tolerance {achieved:.3e})")
        self.achieved = achieved


class DivergenceError(CdistabError):
    """State norm exceeded the blow-up threshold during integration.

    Carries the last valid time and the partial trajectory computed so far.
    """

    def __init__(self, last_time: float, trajectory=None):
        super().__init__(f"state norm exceeded 1e12 at t={last_time:.6g}")
        self.last_time = last_time
        self.trajectory = trajectory


class RangeError(CdistabError, ValueError):
    """A requested time or window lies outside the available span."""


class PreconditionError(CdistabError):
    """A checker was invoked on inputs that violate its stated precondition."""


class ConfigError(CdistabError):
    """A run configuration is malformed or contains unknown keys."""
