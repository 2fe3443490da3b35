"""Adaptive Gauss-Kronrod (G7-K15) integration and an extended-precision
oracle for the closed-form kernels.

The Gauss-Kronrod path is the reference route for the L2 coefficients; the
batched driver :func:`gk_batch` integrates thousands of one-dimensional
integrals at once, which is what makes the reference path usable inside a
time-stepping loop. :func:`oracle_eval` is only meant for tests and audits.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import mpmath
import numpy as np

from fracstep.exceptions import ParameterDomainError, QuadratureError

# {{{ G7-K15 rule

# nodes of the 15-point Kronrod rule on [-1, 1] (positive half, descending)
_XGK = (
    "0.9914553711208126392068546975263",
    "0.9491079123427585245261896840479",
    "0.8648644233597690727897127886409",
    "0.7415311855993944398638647732808",
    "0.5860872354676911302941448382587",
    "0.4058451513773971669066064120770",
    "0.2077849550078984676006894037732",
    "0.0",
)
_WGK = (
    "0.0229353220105292249637320080590",
    "0.0630920926299785532907006631892",
    "0.1047900103222501838398763225415",
    "0.1406532597155259187451895905102",
    "0.1690047266392679028265834265986",
    "0.1903505780647854099132564024211",
    "0.2044329400752988924141619992346",
    "0.2094821410847278280129991748917",
)
# weights of the embedded 7-point Gauss rule at _XGK[1], _XGK[3], _XGK[5], _XGK[7]
_WG = (
    "0.1294849661688696932706114326791",
    "0.2797053914892766679014677714238",
    "0.3818300505051189449503697754890",
    "0.4179591836734693877551020408163",
)


def _rule() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    half = [float(x) for x in _XGK]
    wk = [float(w) for w in _WGK]
    wg_half = [0.0] * 8
    for i, w in zip((1, 3, 5, 7), _WG):
        wg_half[i] = float(w)

    nodes = np.array([-x for x in half[:-1]] + [0.0] + half[-2::-1])
    wkron = np.array(wk[:-1] + [wk[-1]] + wk[-2::-1])
    wgauss = np.array(wg_half[:-1] + [wg_half[-1]] + wg_half[-2::-1])
    return nodes, wkron, wgauss


KRONROD_NODES, KRONROD_WEIGHTS, GAUSS_WEIGHTS = _rule()

# }}}


@dataclass(frozen=True)
class QuadResult:
    value: float
    err_est: float
    subdivisions: int
    converged: bool = True


def gk15(f: Callable[[np.ndarray], np.ndarray], a: float, b: float) -> tuple[float, float]:
    """One G7-K15 panel on ``[a, b]``; returns the Kronrod value and ``|K - G|``."""
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    fx = np.asarray(f(c + h * KRONROD_NODES), dtype=np.float64)
    k = h * float(fx @ KRONROD_WEIGHTS)
    g = h * float(fx @ GAUSS_WEIGHTS)
    return k, abs(k - g)


def adaptive_gk(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rtol: float = 1e-14,
    atol: float = 1e-300,
    budget: int = 2000,
    *,
    strict: bool = False,
) -> QuadResult:
    """Integrate ``f`` over ``[a, b]`` by bisecting the panel with the largest
    error estimate until ``err <= max(atol, rtol * |value|)``.

    ``f`` must accept an array of abscissae. When the subdivision budget is
    exhausted the best value is returned with ``converged=False``, or
    :class:`QuadratureError` is raised if ``strict`` is set.
    """
    if not a < b:
        raise ParameterDomainError(f"need a < b, got [{a!r}, {b!r}]")
    if rtol < 1e-14:
        raise ParameterDomainError(f"rtol below 1e-14 is not attainable, got {rtol!r}")

    value, err = gk15(f, a, b)
    heap = [(-err, a, b, value, err)]
    total_val, total_err = value, err
    nsub = 0

    while total_err > max(atol, rtol * abs(total_val)) and nsub < budget:
        _, pa, pb, pval, perr = heap[0]
        mid = 0.5 * (pa + pb)
        if not _splittable(pa, mid, pb):
            # the worst panel is resolved down to floating-point granularity
            break
        heapq.heappop(heap)
        lv, le = gk15(f, pa, mid)
        rv, re = gk15(f, mid, pb)
        heapq.heappush(heap, (-le, pa, mid, lv, le))
        heapq.heappush(heap, (-re, mid, pb, rv, re))
        nsub += 1

        total_val += lv + rv - pval
        total_err += le + re - perr
        if nsub % 64 == 0:
            total_val = math.fsum(p[3] for p in heap)
            total_err = math.fsum(p[4] for p in heap)

    total_val = math.fsum(p[3] for p in heap)
    total_err = math.fsum(p[4] for p in heap)
    converged = total_err <= max(atol, rtol * abs(total_val))
    if not converged and strict:
        raise QuadratureError(
            f"adaptive_gk: no convergence after {nsub} subdivisions "
            f"(err_est={total_err:.3e})",
            value=total_val,
            err_est=total_err,
        )
    return QuadResult(total_val, total_err, nsub, converged)


def _splittable(a, mid, b):
    # both children must keep their outermost Kronrod nodes strictly inside [a, b]
    xi = KRONROD_NODES[-1]
    lo = 0.5 * (a + mid) - 0.5 * (mid - a) * xi
    hi = 0.5 * (mid + b) + 0.5 * (b - mid) * xi
    return (a < lo) & (lo < mid) & (mid < hi) & (hi < b)


def gk_batch(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    a: np.ndarray,
    b: np.ndarray,
    rtol: float = 1e-14,
    atol: float = 1e-300,
    budget: int = 200,
    *,
    strict: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Adaptively integrate many problems at once.

    ``f(x, idx)`` evaluates problem ``idx[i]`` at abscissa ``x[i]`` (both
    arrays of equal shape). Problem ``p`` is integrated over ``[a[p], b[p]]``.
    Every panel of an unconverged problem whose error exceeds its share of
    the tolerance is bisected, so all problems advance together.

    :returns: values and error estimates, one per problem.
    """
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    nprob = a.size
    if not np.all(a < b):
        raise ParameterDomainError("every interval must satisfy a < b")

    pid = np.arange(nprob)
    pa, pb = a.copy(), b.copy()
    pval, perr = _gk15_panels(f, pid, pa, pb)
    nsub = np.zeros(nprob, dtype=np.int64)

    while True:
        val = np.bincount(pid, weights=pval, minlength=nprob)
        err = np.bincount(pid, weights=perr, minlength=nprob)
        tol = np.maximum(atol, rtol * np.abs(val))
        todo = (err > tol) & (nsub < budget)
        if not np.any(todo):
            break

        npan = np.bincount(pid, minlength=nprob)
        split = todo[pid] & (perr > tol[pid] / npan[pid])
        mid = 0.5 * (pa + pb)
        split &= _splittable(pa, mid, pb)
        if not np.any(split):
            break

        sid, sa, sb, smid = pid[split], pa[split], pb[split], mid[split]
        np.add.at(nsub, sid, 1)
        keep = ~split
        new_id = np.concatenate([sid, sid])
        new_a = np.concatenate([sa, smid])
        new_b = np.concatenate([smid, sb])
        new_val, new_err = _gk15_panels(f, new_id, new_a, new_b)

        pid = np.concatenate([pid[keep], new_id])
        pa = np.concatenate([pa[keep], new_a])
        pb = np.concatenate([pb[keep], new_b])
        pval = np.concatenate([pval[keep], new_val])
        perr = np.concatenate([perr[keep], new_err])

    bad = err > tol
    if strict and np.any(bad):
        worst = int(np.argmax(np.where(bad, err / np.maximum(tol, 1e-300), 0.0)))
        raise QuadratureError(
            f"gk_batch: {int(bad.sum())} of {nprob} integrals did not converge "
            f"(worst err_est={err[worst]:.3e}, value={val[worst]:.6e})",
            value=float(val[worst]),
            err_est=float(err[worst]),
        )
    return val, err


def _gk15_panels(f, pid, pa, pb):
    c = 0.5 * (pa + pb)
    h = 0.5 * (pb - pa)
    x = c[:, None] + h[:, None] * KRONROD_NODES[None, :]
    idx = np.broadcast_to(pid[:, None], x.shape)
    fx = np.asarray(f(x, idx), dtype=np.float64)
    k = h * (fx @ KRONROD_WEIGHTS)
    g = h * (fx @ GAUSS_WEIGHTS)
    return k, np.abs(k - g)


# {{{ extended-precision oracle


def _guard_digits(*small: float) -> int:
    # digits lost to cancellation scale with the magnitude of the small argument
    worst = min((abs(float(s)) for s in small if s != 0), default=1.0)
    return 10 + 3 * max(0, int(-math.log10(worst)) if worst < 1 else 0)


def _I1(theta, d, alpha):
    b1 = 1 - alpha
    return d**b1 * (1 - (1 - theta) ** b1)


def _I2(theta, d, alpha):
    b2 = 2 - alpha
    return d**b2 * (b2 * theta + (1 - theta) ** b2 - 1)


def _J1(x):
    return 1 - mpmath.exp(-x)


def _J2(x):
    e = mpmath.exp(-x)
    return 1 - x * e - e


def _oracle(expr: str, p: dict) -> mpmath.mpf:
    m = {k: mpmath.mpf(v) for k, v in p.items()}
    if expr == "I1":
        return _I1(m["theta"], m["d"], m["alpha"])
    if expr == "I2":
        return _I2(m["theta"], m["d"], m["alpha"])
    if expr == "J1":
        return _J1(m["x"])
    if expr == "J2":
        return _J2(m["x"])
    if expr in ("a", "c_tilde"):
        al, tj, tj1 = m["alpha"], m["tau_j"], m["tau_j1"]
        d = m["gap"] + tj
        theta = tj / d
        i1 = _I1(theta, d, al)
        if expr == "c_tilde":
            return i1 / ((1 - al) * tj1)
        i2 = _I2(theta, d, al)
        return -((2 - al) * tj1 * i1 + 2 * i2) / ((2 - al) * (1 - al) * tj * (tj + tj1))
    if expr in ("a_last", "c_last"):
        al, tp, tk = m["alpha"], m["tau_prev"], m["tau_k"]
        den = (2 - al) * (1 - al) * (tp + tk) * tk**al
        if expr == "a_last":
            return al * tk**2 / (den * tp)
        return 1 / ((1 - al) * tk**al) + al * tk / den
    if expr in ("a_fast", "c_tilde_fast"):
        th, tp, tk = m["theta"], m["tau_prev"], m["tau_k"]
        x = th * tp
        decay = mpmath.exp(-th * tk)
        j1 = _J1(x)
        if expr == "c_tilde_fast":
            return decay * j1 / (th * tk)
        return -decay * (th * tk * j1 + 2 * _J2(x)) / (tp * (tp + tk) * th**2)
    raise ParameterDomainError(f"unknown oracle expression {expr!r}")


_SMALL_ARGS = {
    "I1": ("theta",),
    "I2": ("theta",),
    "J1": ("x",),
    "J2": ("x",),
    "a": ("tau_j",),
    "c_tilde": ("tau_j",),
    "a_last": (),
    "c_last": (),
    "a_fast": ("theta", "tau_prev"),
    "c_tilde_fast": ("theta", "tau_prev"),
}


def oracle_eval(expr: str, dps: int = 50, *, as_mpf: bool = False, **params: float):
    """Evaluate a closed-form kernel with at least ``dps`` significant digits.

    Supported ``expr`` values and their parameters:

    * ``"I1"``, ``"I2"``: ``theta``, ``d``, ``alpha``
    * ``"J1"``, ``"J2"``: ``x``
    * ``"a"``, ``"c_tilde"``: ``tau_j``, ``tau_j1``, ``gap`` (:math:`t_k - t_j`), ``alpha``
    * ``"a_last"``, ``"c_last"``: ``tau_prev``, ``tau_k``, ``alpha``
    * ``"a_fast"``, ``"c_tilde_fast"``: ``theta``, ``tau_prev``, ``tau_k``

    Inputs are taken as exact binary values; the working precision is raised
    above ``dps`` to absorb the cancellation the closed forms suffer for
    small arguments, and the result is rounded once at the end.
    """
    if expr not in _SMALL_ARGS:
        raise ParameterDomainError(f"unknown oracle expression {expr!r}")
    small = [params[k] for k in _SMALL_ARGS[expr] if k in params]
    if expr in ("a", "c_tilde"):
        small = [params["tau_j"] / (params["gap"] + params["tau_j"])]
    elif expr in ("a_fast", "c_tilde_fast"):
        small = [params["theta"] * params["tau_prev"]]
    _check_domain(expr, params)

    with mpmath.workdps(dps + _guard_digits(*small)):
        value = _oracle(expr, params)
        if as_mpf:
            return +value
    return float(value)


def _check_domain(expr: str, p: dict) -> None:
    if "alpha" in p and not 0.0 < p["alpha"] < 1.0:
        raise ParameterDomainError("alpha must lie in (0, 1)")
    if "theta" in p and expr in ("I1", "I2") and not 0.0 < p["theta"] < 1.0:
        raise ParameterDomainError("theta must lie in (0, 1)")
    for key in ("d", "x", "tau_j", "tau_j1", "tau_prev", "tau_k"):
        if key in p and not p[key] > 0.0:
            raise ParameterDomainError(f"{key} must be positive")
    if "gap" in p and not p["gap"] > 0.0:
        raise ParameterDomainError("gap must be positive")


# }}}
