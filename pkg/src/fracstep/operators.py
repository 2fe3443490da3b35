"""Discrete Caputo operators acting on a scalar time series.

``l2_caputo`` is the standard L2 operator (full history, O(k) per level) and
``fast_l2_caputo`` its sum-of-exponentials counterpart (O(N_q) per level).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fracstep.cancellation import DEFAULT_THRESHOLDS, Thresholds
from fracstep.exceptions import IndexRangeError, ParameterDomainError, StateError
from fracstep.l2core import CoeffMode, coeff_last, coeff_row
from fracstep.mesh import TimeMesh
from fracstep.soefast import (
    FastHistoryState,
    SoeApproximation,
    advance_history,
    fast_coeff_row,
)


@dataclass(frozen=True)
class SeriesView:
    """Samples ``u^0, ..., u^n`` of a function on the first ``n + 1`` mesh nodes."""

    mesh: TimeMesh
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or not 1 <= v.size - 1 <= self.mesh.N:
            raise ParameterDomainError(
                f"series needs between 2 and N+1 = {self.mesh.N + 1} values, got shape {v.shape}"
            )
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, mesh: TimeMesh, func) -> SeriesView:
        return cls(mesh, np.asarray(func(mesh.nodes), dtype=np.float64))

    @property
    def last(self) -> int:
        return self.values.size - 1

    def increments(self) -> np.ndarray:
        """``delta[j] = u^j - u^{j-1}``, with ``delta[0] = 0`` as padding."""
        return np.diff(self.values, prepend=self.values[0])


def _check_level(series: SeriesView, k: int) -> None:
    if not 1 <= k <= series.last:
        raise IndexRangeError(f"need 1 <= k <= {series.last}, got k={k}")


def first_step(series: SeriesView, alpha: float) -> float:
    """The ``k = 1`` operator, shared by the standard and fast schemes."""
    u = series.values
    tau1 = series.mesh.tau[1]
    return (u[1] - u[0]) / (math.gamma(2.0 - alpha) * tau1**alpha)


def l2_caputo(
    series: SeriesView,
    alpha: float,
    k: int,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    mode: CoeffMode = CoeffMode.TCTE,
) -> float:
    """Standard L2 approximation of the Caputo derivative at ``t_k``.

    The history terms are accumulated with :func:`math.fsum`.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterDomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    _check_level(series, k)
    if k == 1:
        return first_step(series, alpha)

    mesh = series.mesh
    tau = mesh.tau
    du = series.increments()
    a, c_tilde = coeff_row(mesh, k, alpha, thresholds, mode)
    last = coeff_last(mesh, k, alpha)

    js = np.arange(1, k)
    terms = a * (tau[js] / tau[js + 1] * du[js + 1] - du[js]) + c_tilde * du[js + 1]
    total = math.fsum(
        np.concatenate([terms, [-last.a_last * du[k - 1], last.c_last * du[k]]])
    )
    return total / math.gamma(1.0 - alpha)


def l2_caputo_all(
    series: SeriesView,
    alpha: float,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    mode: CoeffMode = CoeffMode.TCTE,
) -> np.ndarray:
    """``L_k`` for ``k = 1..n``; entry ``0`` of the result is ``nan``."""
    out = np.full(series.last + 1, np.nan)
    for k in range(1, series.last + 1):
        out[k] = l2_caputo(series, alpha, k, thresholds, mode)
    return out


def fast_l2_caputo(
    state: FastHistoryState,
    series: SeriesView,
    alpha: float,
    k: int,
    soe: SoeApproximation,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    mode: CoeffMode = CoeffMode.TCTE,
) -> tuple[float, FastHistoryState]:
    """Fast L2 approximation at ``t_k`` using the history state at ``t_{k-1}``.

    Only ``u^{k-2}, u^{k-1}, u^k`` of ``series`` are read. The state is
    advanced to ``t_k`` in place and returned alongside the value.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterDomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    _check_level(series, k)
    if k == 1:
        if state.k_current != 1:
            raise StateError(f"history is at k={state.k_current}, expected k=1")
        return first_step(series, alpha), state
    if state.k_current != k - 1:
        raise StateError(f"history is at k={state.k_current}, cannot evaluate k={k}")

    mesh = series.mesh
    u = series.values
    d_prev = u[k - 1] - u[k - 2]
    d_curr = u[k] - u[k - 1]

    a, c_tilde = fast_coeff_row(mesh, k, soe.nodes, thresholds, mode)
    decay = np.exp(-soe.nodes * mesh.tau[k])
    advance_history(state.H, decay, a, c_tilde, mesh.tau[k - 1] / mesh.tau[k], d_prev, d_curr)
    state.k_current = k

    last = coeff_last(mesh, k, alpha)
    value = math.fsum(
        [float(soe.weights @ state.H), -last.a_last * d_prev, last.c_last * d_curr]
    )
    return value / math.gamma(1.0 - alpha), state


def fast_l2_caputo_all(
    series: SeriesView,
    alpha: float,
    soe: SoeApproximation,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    mode: CoeffMode = CoeffMode.TCTE,
) -> np.ndarray:
    out = np.full(series.last + 1, np.nan)
    state = FastHistoryState.zeros(soe)
    for k in range(1, series.last + 1):
        out[k], state = fast_l2_caputo(state, series, alpha, k, soe, thresholds, mode)
    return out


def caputo_power(p: float, alpha: float, t):
    """Exact Caputo derivative of ``t**p`` (``p = 0`` or ``p > 0``)."""
    t = np.asarray(t, dtype=np.float64)
    if p == 0:
        return np.zeros_like(t)
    if p < 0:
        raise ParameterDomainError("power must be non-negative")
    return math.gamma(p + 1.0) / math.gamma(p + 1.0 - alpha) * np.power(t, p - alpha)
