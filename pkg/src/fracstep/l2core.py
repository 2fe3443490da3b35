"""Coefficients of the standard L2 discretisation of the Caputo derivative.

For ``1 <= j <= k - 1`` the history coefficients are assembled from the two
kernels

.. math::

    I_1 = d^{1-\\alpha} [1 - (1-\\theta)^{1-\\alpha}], \\qquad
    I_2 = d^{2-\\alpha} [(2-\\alpha)\\theta + (1-\\theta)^{2-\\alpha} - 1],

with :math:`d = t_k - t_{j-1}` and :math:`\\theta = \\tau_j / d`. Both lose
all their significant digits to cancellation when :math:`\\theta` is tiny,
which is exactly what happens near :math:`t = 0` on strongly graded meshes.
The TCTE path keeps the closed form above the thresholds and switches to a
truncated binomial series (all terms positive) below them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from fracstep.cancellation import DEFAULT_THRESHOLDS, DELTA0, Thresholds
from fracstep.exceptions import IndexRangeError, ParameterDomainError
from fracstep.mesh import TimeMesh
from fracstep.quadrature import adaptive_gk, gk_batch

#: largest truncation number accepted by the Taylor paths
MAX_TERMS = 200


class CoeffMode(str, enum.Enum):
    DIRECT = "direct"
    TCTE = "tcte"
    GAUSS_KRONROD = "gk"

    @classmethod
    def parse(cls, value: str | CoeffMode) -> CoeffMode:
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"gauss": "gk", "gauss-kronrod": "gk", "gausskronrod": "gk", "taylor": "tcte"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ParameterDomainError(f"unknown coefficient mode {value!r}") from None


@dataclass(frozen=True)
class KernelPairI:
    I1: float  # noqa: N815
    I2: float  # noqa: N815


@dataclass(frozen=True)
class StencilPair:
    """History coefficients ``a`` (negative) and ``c_tilde`` (positive)."""

    a: float
    c_tilde: float


@dataclass(frozen=True)
class LastPair:
    a_last: float
    c_last: float


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ParameterDomainError(f"alpha must lie in (0, 1), got {alpha!r}")


def truncation_number(x, delta0: float = DELTA0):
    """Smallest ``M >= 1`` with ``x**M <= delta0``, i.e. ``ceil(log_x delta0)``."""
    x = np.asarray(x, dtype=np.float64)
    if np.any((x <= 0.0) | (x >= 1.0)):
        raise ParameterDomainError("Taylor argument must lie in (0, 1)")
    return _nterms(x, delta0).astype(np.int64)


def _nterms(x: np.ndarray, delta0: float) -> np.ndarray:
    # unchecked truncation numbers (as floats) for arguments already in (0, 1);
    # M grows with x, so the cap only needs checking at the largest argument
    m = np.maximum(np.ceil(math.log(delta0) / np.log(x)), 1.0)
    if m.size and m.max() > MAX_TERMS:
        raise ParameterDomainError(
            f"Taylor truncation needs more than {MAX_TERMS} terms; argument too close to 1"
        )
    return m


def _binomial_tail(theta: np.ndarray, n: int, alpha: float, first: int, nterms: np.ndarray) -> np.ndarray:
    """Sum of the positive terms ``|binom(n - alpha, m) theta^m|`` for
    ``m = first, ..., first + nterms - 1``; summed smallest first.

    Every factor ``n - alpha - m + 1`` is formed as ``(integer) - alpha`` so it
    is rounded once, which matters when it is close to zero.
    """
    mmax = int(nterms.max())
    lead = 1.0
    for m in range(1, first + 1):
        lead = lead * (abs((n - m + 1) - alpha) / m) * theta
    ms = np.arange(first + 1, first + mmax)
    steps = np.empty((mmax,) + theta.shape)
    steps[0] = lead
    steps[1:] = np.abs(((ms - 1 - n) + alpha) / ms)[:, np.newaxis] * theta
    # ratios past the truncation number are zeroed, so the running product
    # below leaves those terms at zero
    steps[1:] *= np.arange(1, mmax)[:, np.newaxis] < nterms
    for i in range(1, mmax):
        steps[i] *= steps[i - 1]
    total = steps[-1].copy()
    for i in range(mmax - 2, -1, -1):
        total += steps[i]
    return total


def _kernels_I(theta, d, alpha, theta_s1, theta_s2, delta0=DELTA0):  # noqa: N802
    b1 = 1.0 - alpha
    b2 = 2.0 - alpha
    # d^(n - alpha) as d^n d^-alpha: the exponent alpha is exact, while a rounded
    # 1 - alpha would be amplified by |ln d| on strongly graded meshes
    d1 = d * np.power(d, -alpha)
    d2 = d * d1
    one_minus = 1.0 - theta
    I1 = d1 * (1.0 - np.power(one_minus, b1))  # noqa: N806
    I2 = d2 * ((b2 * theta + np.power(one_minus, b2)) - 1.0)  # noqa: N806

    small = theta <= theta_s1
    if np.any(small):
        th = theta[small]
        I1[small] = d1[small] * _binomial_tail(th, 1, alpha, 1, _nterms(th, delta0))
    small = theta <= theta_s2
    if np.any(small):
        th = theta[small]
        I2[small] = d2[small] * _binomial_tail(th, 2, alpha, 2, _nterms(th, delta0))
    return I1, I2


def eval_I(theta, d, alpha: float, thresholds: Thresholds = DEFAULT_THRESHOLDS) -> KernelPairI:  # noqa: N802
    """Kernels as the coefficient rows evaluate them: truncated series below
    ``theta_s1`` (for ``I1``) and ``theta_s2`` (for ``I2``), closed form above.

    Accepts scalars or arrays; the result fields have the broadcast shape.
    """
    _check_alpha(alpha)
    th, dd = np.broadcast_arrays(np.asarray(theta, dtype=np.float64), np.asarray(d, dtype=np.float64))
    if np.any((th <= 0.0) | (th >= 1.0)) or np.any(dd <= 0.0):
        raise ParameterDomainError("need 0 < theta < 1 and d > 0")
    i1, i2 = _kernels_I(th.ravel(), dd.ravel(), alpha, thresholds.theta_s1, thresholds.theta_s2)
    if th.ndim == 0:
        return KernelPairI(float(i1[0]), float(i2[0]))
    return KernelPairI(i1.reshape(th.shape), i2.reshape(th.shape))


def eval_I_direct(theta: float, d: float, alpha: float) -> KernelPairI:  # noqa: N802
    """Closed-form kernels; inaccurate for small ``theta`` by construction."""
    _check_alpha(alpha)
    if not 0.0 < theta < 1.0 or not d > 0.0:
        raise ParameterDomainError("need 0 < theta < 1 and d > 0")
    i1, i2 = _kernels_I(np.array([theta]), np.array([d]), alpha, 0.0, 0.0)
    return KernelPairI(float(i1[0]), float(i2[0]))


def eval_I_taylor(theta: float, d: float, alpha: float, delta0: float = DELTA0) -> KernelPairI:  # noqa: N802
    """Truncated binomial series for the kernels with ``ceil(log_theta delta0)`` terms."""
    _check_alpha(alpha)
    if not 0.0 < theta < 1.0:
        raise ParameterDomainError(f"Taylor path needs 0 < theta < 1, got {theta!r}")
    if not d > 0.0:
        raise ParameterDomainError("d must be positive")
    th = np.array([theta])
    m = truncation_number(th, delta0)
    d1 = d * d ** (-alpha)
    i1 = d1 * _binomial_tail(th, 1, alpha, 1, m)
    i2 = (d * d1) * _binomial_tail(th, 2, alpha, 2, m)
    return KernelPairI(float(i1[0]), float(i2[0]))


# {{{ history coefficients


def _check_k(mesh: TimeMesh, k: int) -> None:
    if not 2 <= k <= mesh.N:
        raise IndexRangeError(f"need 2 <= k <= N = {mesh.N}, got k={k}")


def _row_geometry(mesh: TimeMesh, k: int, js: np.ndarray):
    t, tau = mesh.nodes, mesh.tau
    tj = tau[js]
    tj1 = tau[js + 1]
    gap = t[k] - t[js]
    d = gap + tj
    return tj, tj1, gap, d, tj / d


def coeff_row(
    mesh: TimeMesh,
    k: int,
    alpha: float,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    mode: CoeffMode = CoeffMode.TCTE,
    *,
    gk_rtol: float = 1e-14,
) -> tuple[np.ndarray, np.ndarray]:
    """All history coefficients ``a_j^{(k)}`` and ``c~_j^{(k)}``, ``j = 1..k-1``."""
    _check_alpha(alpha)
    _check_k(mesh, k)
    return _coeff_entries(mesh, k, np.arange(1, k), alpha, thresholds, CoeffMode.parse(mode), gk_rtol)


def coeff_pair(
    mesh: TimeMesh,
    j: int,
    k: int,
    alpha: float,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    mode: CoeffMode = CoeffMode.TCTE,
) -> StencilPair:
    _check_alpha(alpha)
    _check_k(mesh, k)
    if not 1 <= j <= k - 1:
        raise IndexRangeError(f"need 1 <= j <= k-1, got j={j}, k={k}")
    a, c = _coeff_entries(mesh, k, np.array([j]), alpha, thresholds, CoeffMode.parse(mode), 1e-14)
    return StencilPair(float(a[0]), float(c[0]))


def _coeff_entries(mesh, k, js, alpha, thresholds, mode, gk_rtol):
    tj, tj1, gap, d, theta = _row_geometry(mesh, k, js)
    b1 = 1.0 - alpha
    b2 = 2.0 - alpha

    if mode is CoeffMode.GAUSS_KRONROD:
        return _coeff_entries_gk(tj, tj1, gap, alpha, gk_rtol)

    if mode is CoeffMode.DIRECT:
        s1 = s2 = 0.0
    else:
        s1, s2 = thresholds.theta_s1, thresholds.theta_s2
    I1, I2 = _kernels_I(theta, d, alpha, s1, s2)  # noqa: N806

    a = -(b2 * tj1 * I1 + 2.0 * I2) / (b2 * b1 * tj * (tj + tj1))
    c_tilde = I1 / (b1 * tj1)
    return a, c_tilde


def _coeff_entries_gk(tj, tj1, gap, alpha, rtol):
    # s = t_j - tau_j * y, so the integrand is smooth and y = 0 is the end
    # nearest to the kernel singularity at t_k
    n = tj.size
    tau_j = np.concatenate([tj, tj])
    tau_j1 = np.concatenate([tj1, tj1])
    g = np.concatenate([gap, gap])
    which_a = np.arange(2 * n) < n

    def integrand(y, idx):
        kern = np.power(g[idx] + tau_j[idx] * y, -alpha)
        return np.where(which_a[idx], (2.0 * tau_j[idx] * y + tau_j1[idx]) * kern, kern)

    zeros = np.zeros(2 * n)
    ones = np.ones(2 * n)
    val, _ = gk_batch(integrand, zeros, ones, rtol=rtol)
    a = -val[:n] / (tj + tj1)
    c_tilde = (tj / tj1) * val[n:]
    return a, c_tilde


# }}}

# {{{ last-panel coefficients


def coeff_last(mesh: TimeMesh, k: int, alpha: float) -> LastPair:
    """Closed-form ``a_k^{(k)}`` and ``c_k^{(k)}``; every term is positive so no
    cancellation can occur.
    """
    _check_alpha(alpha)
    _check_k(mesh, k)
    tp = float(mesh.tau[k - 1])
    tk = float(mesh.tau[k])
    tk_a = tk**alpha
    den = (2.0 - alpha) * (1.0 - alpha) * (tp + tk) * tk_a
    a_last = alpha * tk * tk / (den * tp)
    c_last = 1.0 / ((1.0 - alpha) * tk_a) + alpha * tk / den
    return LastPair(a_last, c_last)


def coeff_last_gk(
    mesh: TimeMesh, k: int, alpha: float, rtol: float = 1e-14, budget: int = 4000
) -> LastPair:
    """Last-panel coefficients integrated adaptively from their integral form.

    The kernel is singular at ``s = t_k``; the integrand is written in the
    distance ``y = (t_k - s) / tau_k`` so that bisection towards the
    singularity stays resolvable in floating point.
    """
    _check_alpha(alpha)
    _check_k(mesh, k)
    tp = float(mesh.tau[k - 1])
    tk = float(mesh.tau[k])

    ra = adaptive_gk(lambda y: (1.0 - 2.0 * y) * y ** (-alpha), 0.0, 1.0, rtol=rtol, budget=budget, strict=True)
    rc = adaptive_gk(
        lambda y: (2.0 * tk * (1.0 - y) + tp) * y ** (-alpha), 0.0, 1.0, rtol=rtol, budget=budget, strict=True
    )
    scale = tk ** (-alpha) / (tp + tk)
    return LastPair(scale * tk * tk / tp * ra.value, scale * rc.value)


# }}}


def gamma(x: float) -> float:
    return math.gamma(x)
