from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fracstep.cancellation import DEFAULT_THRESHOLDS, DELTA0, Thresholds
from fracstep.exceptions import IndexRangeError, ParameterDomainError
from fracstep.l2core import (
    CoeffMode,
    coeff_last,
    coeff_last_gk,
    coeff_pair,
    coeff_row,
    eval_I_direct,
    eval_I_taylor,
    truncation_number,
)
from fracstep.mesh import build_graded_mesh, build_uniform_mesh
from fracstep.quadrature import oracle_eval

meshes = st.builds(
    build_graded_mesh,
    N=st.integers(2, 400),
    r=st.floats(1.0, 7.0),
    T=st.floats(0.1, 100.0),
)
alphas = st.floats(0.05, 0.95)


def test_mode_parse():
    assert CoeffMode.parse("TCTE") is CoeffMode.TCTE
    assert CoeffMode.parse("gauss-kronrod") is CoeffMode.GAUSS_KRONROD
    assert CoeffMode.parse(CoeffMode.DIRECT) is CoeffMode.DIRECT
    with pytest.raises(ParameterDomainError):
        CoeffMode.parse("simpson")


# {{{ kernels


def test_direct_kernel_examples():
    pair = eval_I_direct(0.75, 1.0, 0.5)
    assert pair.I1 == 0.5
    assert pair.I2 == 0.25


def test_direct_kernel_loses_digits():
    exact = oracle_eval("I2", theta=1e-6, d=1.0, alpha=0.4)
    direct = eval_I_direct(1e-6, 1.0, 0.4).I2
    taylor = eval_I_taylor(1e-6, 1.0, 0.4).I2
    assert abs(taylor / exact - 1) <= 4 * DELTA0
    # the closed form subtracts numbers of size 1 to get 5e-13
    assert abs(direct / exact - 1) > 1e3 * DELTA0


@pytest.mark.parametrize(
    ("theta", "expected"), [(1e-4, 4), (1e-2, 8), (0.5, 52), (1e-12, 2), (1e-16, 1), (1e-20, 1)]
)
def test_truncation_number(theta, expected):
    assert truncation_number(theta) == expected
    assert theta ** int(truncation_number(theta)) <= DELTA0


def test_truncation_number_cap():
    with pytest.raises(ParameterDomainError):
        truncation_number(0.9)
    with pytest.raises(ParameterDomainError):
        truncation_number(1.0)


def test_taylor_kernel_example():
    pair = eval_I_taylor(1e-6, 1.0, 0.4)
    assert pair.I1 == pytest.approx(6.000001200000559728824563e-07, rel=4 * DELTA0)
    assert pair.I2 == pytest.approx(4.800000640000223565689307e-13, rel=4 * DELTA0)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("theta", np.geomspace(1e-12, 1e-2, 11))
def test_taylor_truncation_bound(alpha, theta):
    # truncation error alone, measured in extended precision
    m = int(truncation_number(theta))
    with mpmath.workdps(60):
        th = mpmath.mpf(theta)
        b1, b2 = 1 - mpmath.mpf(alpha), 2 - mpmath.mpf(alpha)
        for beta, first, sign, exact in (
            (b1, 1, -1, 1 - (1 - th) ** b1),
            (b2, 2, 1, b2 * th + (1 - th) ** b2 - 1),
        ):
            series = sign * mpmath.fsum(mpmath.binomial(beta, i) * (-th) ** i for i in range(first, first + m))
            assert abs(series / exact - 1) < th**m


@given(theta=st.floats(1e-15, 0.3), d=st.floats(1e-10, 1e3), alpha=alphas)
def test_taylor_kernels_positive_and_accurate(theta, d, alpha):
    pair = eval_I_taylor(theta, d, alpha)
    assert pair.I1 > 0.0
    assert pair.I2 > 0.0
    ref1 = oracle_eval("I1", theta=theta, d=d, alpha=alpha)
    ref2 = oracle_eval("I2", theta=theta, d=d, alpha=alpha)
    # theta^M <= delta0 plus roundings; longer series (larger theta) round more
    tol = (4 if theta <= 1e-2 else 32) * DELTA0
    assert abs(pair.I1 / ref1 - 1) <= tol
    assert abs(pair.I2 / ref2 - 1) <= tol


def test_kernel_domain_errors():
    with pytest.raises(ParameterDomainError):
        eval_I_taylor(0.0, 1.0, 0.5)
    with pytest.raises(ParameterDomainError):
        eval_I_direct(0.5, -1.0, 0.5)
    with pytest.raises(ParameterDomainError):
        eval_I_taylor(0.5, 1.0, 1.0)


# }}}

# {{{ coefficients


def test_coeff_pair_example():
    mesh = build_uniform_mesh(3, 3.0)
    pair = coeff_pair(mesh, 1, 2, 0.5)
    assert pair.a == pytest.approx(-0.8047378541243650162672296, rel=2e-16)
    assert pair.c_tilde == pytest.approx(0.8284271247461900976033774, rel=2e-16)


def test_coeff_last_example():
    mesh = build_uniform_mesh(3, 3.0)
    for k in (2, 3):
        last = coeff_last(mesh, k, 0.5)
        assert last.a_last == pytest.approx(1.0 / 3.0, rel=2e-16)
        assert last.c_last == pytest.approx(7.0 / 3.0, rel=2e-16)


def test_coeff_ranges():
    mesh = build_uniform_mesh(4, 1.0)
    with pytest.raises(IndexRangeError):
        coeff_pair(mesh, 2, 2, 0.5)
    with pytest.raises(IndexRangeError):
        coeff_row(mesh, 5, 0.5)
    with pytest.raises(IndexRangeError):
        coeff_last(mesh, 0, 0.5)
    with pytest.raises(ParameterDomainError):
        coeff_row(mesh, 3, 0.0)
    with pytest.raises(IndexRangeError):
        coeff_row(mesh, 1, 0.5)


@given(mesh=meshes, alpha=alphas, data=st.data())
def test_coefficients_match_oracle(mesh, alpha, data):
    k = data.draw(st.integers(2, mesh.N))
    j = data.draw(st.integers(1, k - 1))
    pair = coeff_pair(mesh, j, k, alpha)
    # the accuracy guaranteed by the default thresholds, relative to I2
    tol = 1.332e-11 / (1.0 - alpha)
    kw = {
        "tau_j": float(mesh.tau[j]),
        "tau_j1": float(mesh.tau[j + 1]),
        "gap": float(mesh.nodes[k] - mesh.nodes[j]),
        "alpha": alpha,
    }
    assert pair.a == pytest.approx(oracle_eval("a", **kw), rel=tol)
    assert pair.c_tilde == pytest.approx(oracle_eval("c_tilde", **kw), rel=tol)


@given(mesh=meshes, alpha=alphas, data=st.data())
def test_sign_invariants(mesh, alpha, data):
    k = data.draw(st.integers(2, mesh.N))
    for mode in (CoeffMode.TCTE, CoeffMode.GAUSS_KRONROD):
        a, c = coeff_row(mesh, k, alpha, mode=mode)
        assert np.all(a < 0.0)
        assert np.all(c > 0.0)
    last = coeff_last(mesh, k, alpha)
    assert last.a_last > 0.0 and last.c_last > 0.0


@given(mesh=meshes, alpha=alphas, data=st.data())
def test_tcte_matches_gk(mesh, alpha, data):
    k = data.draw(st.integers(2, mesh.N))
    a_t, c_t = coeff_row(mesh, k, alpha)
    a_g, c_g = coeff_row(mesh, k, alpha, mode=CoeffMode.GAUSS_KRONROD)
    assert np.allclose(a_t, a_g, rtol=1e-10, atol=0.0)
    assert np.allclose(c_t, c_g, rtol=1e-10, atol=0.0)


def test_tcte_equals_direct_above_thresholds():
    mesh = build_graded_mesh(300, 4.0, 1.0)
    for k in (2, 17, 150, 300):
        js = np.arange(1, k)
        theta = mesh.tau[js] / (mesh.nodes[k] - mesh.nodes[js - 1])
        above = theta > max(DEFAULT_THRESHOLDS.theta_s1, DEFAULT_THRESHOLDS.theta_s2)
        a_t, c_t = coeff_row(mesh, k, 0.3)
        a_d, c_d = coeff_row(mesh, k, 0.3, mode=CoeffMode.DIRECT)
        assert np.array_equal(a_t[above], a_d[above])
        assert np.array_equal(c_t[above], c_d[above])
        # zero thresholds in TCTE mode are the direct computation
        a_z, c_z = coeff_row(mesh, k, 0.3, Thresholds.direct(), CoeffMode.TCTE)
        assert np.array_equal(a_z, a_d)
        assert np.array_equal(c_z, c_d)


@given(mesh=meshes, alpha=alphas, data=st.data())
def test_last_pair_gk(mesh, alpha, data):
    k = data.draw(st.integers(2, mesh.N))
    closed = coeff_last(mesh, k, alpha)
    quad = coeff_last_gk(mesh, k, alpha)
    assert quad.a_last == pytest.approx(closed.a_last, rel=1e-10)
    assert quad.c_last == pytest.approx(closed.c_last, rel=1e-10)
    kw = {"tau_prev": float(mesh.tau[k - 1]), "tau_k": float(mesh.tau[k]), "alpha": alpha}
    assert closed.a_last == pytest.approx(oracle_eval("a_last", **kw), rel=1e-13)
    assert closed.c_last == pytest.approx(oracle_eval("c_last", **kw), rel=1e-13)


def test_direct_mode_fails_on_strong_grading():
    # the failure mode the thresholds exist to prevent
    mesh = build_graded_mesh(3200, 5.0, 1.0)
    k = 3200
    a_t, _ = coeff_row(mesh, k, 0.4)
    a_d, _ = coeff_row(mesh, k, 0.4, mode=CoeffMode.DIRECT)
    kw = {"tau_j": float(mesh.tau[1]), "tau_j1": float(mesh.tau[2]), "gap": float(mesh.nodes[k] - mesh.nodes[1]), "alpha": 0.4}
    ref = oracle_eval("a", **kw)
    assert abs(a_t[0] / ref - 1) < 1e-13
    assert abs(a_d[0] / ref - 1) > 1e-3 or not math.isfinite(a_d[0])


# }}}
