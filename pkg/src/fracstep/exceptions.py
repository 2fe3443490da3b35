"""Exception hierarchy shared by all fracstep modules."""

from __future__ import annotations


class FracstepError(Exception):
    """Base class for every error raised by this package."""


class ParameterDomainError(FracstepError, ValueError):
    """A parameter lies outside its mathematical domain."""


class IndexRangeError(FracstepError, IndexError):
    """A mesh or stencil index is outside the valid range."""


class NumericalFailure(FracstepError, RuntimeError):
    """A numerical procedure could not deliver the requested accuracy."""


class QuadratureError(NumericalFailure):
    """Adaptive quadrature ran out of subdivisions before converging."""

    def __init__(self, message: str, value: float = float("nan"), err_est: float = float("inf")):
        super().__init__(message)
        self.value = value
        self.err_est = err_est


class SoeConstructionError(NumericalFailure):
    """No sum-of-exponentials approximation met the tolerance within budget."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


class SingularSystemError(NumericalFailure):
    """A time-step linear system turned out to be singular."""


class StateError(FracstepError, RuntimeError):
    """Fast-history state used out of order."""


class ConfigError(FracstepError, ValueError):
    """Invalid experiment configuration."""
