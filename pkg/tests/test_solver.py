from __future__ import annotations

import math

import numpy as np
import pytest

from fracstep.exceptions import ParameterDomainError, SingularSystemError
from fracstep.l2core import CoeffMode
from fracstep.solver import (
    Scheme,
    _step_solve,
    build_grid,
    cheb_diff,
    clenshaw_curtis_weights,
    convergence_study,
    example_problem,
    expected_rates,
    observed_rate,
    optimal_grading,
    solve,
)


@pytest.mark.parametrize("n", [3, 5, 8, 17])
def test_cheb_diff_polynomials(n):
    x, D = cheb_diff(n)  # noqa: N806
    assert np.all(np.diff(x) > 0)
    assert x[0] == -1.0 and x[-1] == 1.0
    for p in range(n):
        assert np.allclose(D @ x**p, p * x ** max(p - 1, 0) if p else 0.0, atol=1e-11 * n**2)


@pytest.mark.parametrize("n", [3, 5, 8, 21])
def test_clenshaw_curtis_exactness(n):
    x, _ = cheb_diff(n)
    w = clenshaw_curtis_weights(n)
    for p in range(n):
        exact = 0.0 if p % 2 else 2.0 / (p + 1)
        assert w @ x**p == pytest.approx(exact, abs=1e-14)


def test_grid_norm_and_laplacian():
    grid = build_grid(5)
    u = (grid.X**2 - 1) * (grid.Y**2 - 1)
    # int (1 - x^2)^2 dx = 16/15
    assert grid.l2_norm(u) == pytest.approx(16.0 / 15.0, rel=1e-14)
    lap = grid.laplacian @ u
    assert np.allclose(lap, 2 * (grid.X**2 + grid.Y**2 - 2), atol=1e-13)
    with pytest.raises(ParameterDomainError):
        build_grid(2)


@pytest.mark.parametrize("name", ["ex1", "ex2"])
def test_forcing_consistency(name):
    # f = d^alpha u - Lap u with d^alpha t^alpha = Gamma(1 + alpha)
    alpha, t = 0.3, 0.7
    prob = example_problem(name, alpha, 10)
    grid = build_grid(24)
    u = prob.exact(t, grid.X, grid.Y)
    shape = u / t**alpha
    lhs = math.gamma(1 + alpha) * shape - grid.laplacian @ u
    assert np.allclose(lhs, prob.forcing(t, grid.X, grid.Y), atol=1e-9)


def test_example_defaults():
    p1 = example_problem("ex1", 0.4, 10)
    p2 = example_problem("ex2", 0.6, 10)
    assert (p1.T, p1.space_n, p2.T, p2.space_n) == (1.0, 20, 10.0, 5)
    assert p2.r == optimal_grading(0.6) == pytest.approx(4.0)
    assert p1.replace(N=7).N == 7
    assert p1.describe()["mode"] == "tcte"
    with pytest.raises(ParameterDomainError):
        example_problem("ex3", 0.5, 10)
    with pytest.raises(ParameterDomainError):
        example_problem("ex1", 1.0, 10)
    with pytest.raises(ParameterDomainError):
        example_problem("ex1", 0.5, 10, scheme="slow")


def test_rates_helpers():
    assert observed_rate(4.0, 1.0, 100, 200) == pytest.approx(2.0)
    assert expected_rates(0.6, 4.0) == (2.4, 2.4)
    assert expected_rates(0.4, 5.0) == (2.0, 2.6)


def test_singular_step():
    with pytest.raises(SingularSystemError):
        _step_solve(0.0, np.zeros((3, 3)), np.ones(3))


def test_solve_ex2_small():
    prob = example_problem("ex2", 0.6, 200)
    rep = solve(prob, keep_solutions=True)
    assert rep.err_per_step.shape == (200,)
    assert rep.solutions.shape == (201, 9)
    assert rep.err_max == np.max(rep.err_per_step)
    assert rep.err_T == rep.err_per_step[-1]
    assert rep.err_max < 1e-4
    assert rep.config["theta_s1"] == 1e-4


def test_fast_solver_matches_standard():
    prob = example_problem("ex2", 0.6, 300)
    std = solve(prob, keep_solutions=True)
    fast = solve(prob.replace(scheme=Scheme.FAST), keep_solutions=True)
    assert fast.soe_count > 0
    assert np.max(np.abs(std.solutions - fast.solutions)) <= 1e-10
    assert abs(std.err_T - fast.err_T) <= 1e-11


def test_gk_mode_solver():
    prob = example_problem("ex1", 0.6, 60, r=(3 - 0.6) / 0.95, space_n=8)
    a = solve(prob)
    b = solve(prob.replace(mode=CoeffMode.GAUSS_KRONROD))
    assert np.max(np.abs(a.err_per_step - b.err_per_step)) <= 1e-13


def test_convergence_study():
    prob = example_problem("ex2", 0.5, 100)
    Ns = [100, 200, 400]  # noqa: N806
    rows = convergence_study(prob, Ns, gradings=[2.0, prob.r])
    assert len(rows) == 6
    assert math.isnan(rows[0].rate_max) and math.isnan(rows[3].rate_max)
    assert (rows[2].expected_max, rows[5].expected_max) == (1.0, 2.5)
    # err_max ~ N^-min(r alpha, 3 - alpha), approached from below on r = 2
    assert rows[2].rate_max == pytest.approx(1.0, abs=0.1)
    assert rows[5].rate_max == pytest.approx(2.5, abs=0.05)
    threaded = convergence_study(prob, Ns, gradings=[2.0, prob.r], workers=2)
    assert [r.err_max for r in rows] == [r.err_max for r in threaded]
    with pytest.raises(ParameterDomainError):
        convergence_study(prob, [100])
