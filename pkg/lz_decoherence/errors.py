from typing import Optional


class LzError(Exception):
    """Base class for every error raised by the simulator."""


class DomainError(LzError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class RegimeMismatchError(DomainError):
    """A regime-specific predictor received noise from another quadrant."""


class DegenerateBasisError(DomainError):
    """The instantaneous adiabatic basis is undefined (zero gap at zero bias)."""


class IntegrationError(LzError, RuntimeError):
    """
    Raised when propagation leaves the physical state space.

    :param message: A description of the failure.
    :param seed: The trajectory seed, when the failure happened inside an ensemble.
    """

    def __init__(self, message: str, seed: Optional[int] = None) -> None:
        if seed is not None:
            message = f"{message} (trajectory seed {seed})"
        super().__init__(message)
        self.seed = seed


class StepControlError(IntegrationError):
    """
    Raised when a time step violates step control.

    :param message: A description of the violation.
    :param suggested_dt: A step size that satisfies the rule.
    """

    def __init__(self, message: str, suggested_dt: float) -> None:
        super().__init__(f"{message}; use dt <= {suggested_dt:.6g}")
        self.suggested_dt = suggested_dt


class ConfigError(LzError, ValueError):
    """
    Raised for an invalid run configuration.

    :param field: Dotted path of the offending config field. ex. 'system.delta'
    :param message: What is wrong with it.
    """

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field
