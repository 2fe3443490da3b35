"""Machine constants, the delta-cancellation predicate and the thresholds
that decide when the closed-form kernels are safe to evaluate directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath

from fracstep.exceptions import ParameterDomainError

#: unit roundoff used throughout, 2**-52 for IEEE doubles
DELTA0 = 2.0**-52


@dataclass(frozen=True)
class MachineParams:
    delta0: float = DELTA0
    delta: float = 1e-12

    def __post_init__(self) -> None:
        if not self.delta0 > 0.0:
            raise ParameterDomainError("delta0 must be positive")
        if not self.delta > 12.0 * self.delta0:
            raise ParameterDomainError(
                f"cancellation tolerance must exceed 12*delta0 = {12 * self.delta0:.3e}, "
                f"got {self.delta!r}"
            )


@dataclass(frozen=True)
class Thresholds:
    """Switch points between direct evaluation and truncated Taylor series.

    ``theta_s*`` apply to the ratio :math:`\\tau_j/(t_k - t_{j-1})` of the
    standard scheme and ``theta_f*`` to :math:`\\theta^\\ell \\tau_{k-1}` of
    the fast scheme. All zeros means "always evaluate directly".
    """

    theta_s1: float = 1e-4
    theta_s2: float = 1e-2
    theta_f1: float = 1e-4
    theta_f2: float = 1e-2

    def __post_init__(self) -> None:
        for name in ("theta_s1", "theta_s2", "theta_f1", "theta_f2"):
            value = getattr(self, name)
            if not (value >= 0.0 and math.isfinite(value)):
                raise ParameterDomainError(f"{name} must be a finite non-negative number")

    @classmethod
    def direct(cls) -> Thresholds:
        return cls(0.0, 0.0, 0.0, 0.0)

    def as_dict(self) -> dict[str, float]:
        return {
            "theta_s1": self.theta_s1,
            "theta_s2": self.theta_s2,
            "theta_f1": self.theta_f1,
            "theta_f2": self.theta_f2,
        }


DEFAULT_THRESHOLDS = Thresholds()


def thresholds_from_delta(alpha: float, machine: MachineParams) -> Thresholds:
    """Thresholds guaranteeing that no subtraction in the kernels is a
    ``machine.delta``-cancellation.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterDomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    d0, d = machine.delta0, machine.delta
    return Thresholds(
        theta_s1=2.0 * d0 / ((1.0 - alpha) * d),
        theta_s2=math.sqrt(6.0 * d0 / ((1.0 - alpha) * d)),
        theta_f1=4.0 * d0 / d,
        theta_f2=math.sqrt(12.0 * d0 / d),
    )


def relative_difference_error(x, y, x_approx, y_approx, dps: int = 50) -> float:
    """Relative error of ``x_approx - y_approx`` against ``x - y``.

    Evaluated with ``dps`` significant digits so that the floating-point
    subtraction itself does not pollute the measurement. ``x`` and ``y``
    may be mpmath numbers holding the true (unrounded) values.
    """
    with mpmath.workdps(dps):
        exact = mpmath.mpf(x) - mpmath.mpf(y)
        if exact == 0:
            raise ParameterDomainError("relative error undefined for x == y")
        approx = mpmath.mpf(x_approx) - mpmath.mpf(y_approx)
        return float(abs((approx - exact) / exact))


def is_delta_cancellation(x, y, x_approx, y_approx, delta: float) -> bool:
    """Whether the subtraction ``x_approx - y_approx`` is a delta-cancellation."""
    return relative_difference_error(x, y, x_approx, y_approx) >= delta
