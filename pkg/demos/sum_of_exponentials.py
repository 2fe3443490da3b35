"""
Fast evaluation with a sum of exponentials
==========================================

Replacing the kernel ``t^-alpha`` on ``[dt, T]`` by a short exponential sum
turns the history of the L2 operator into ``N_q`` scalar recurrences, so a
step costs ``O(N_q)`` instead of ``O(k)``.
"""

from __future__ import annotations

import numpy as np

from fracstep import (
    SeriesView,
    build_graded_mesh,
    build_soe,
    example_problem,
    fast_l2_caputo_all,
    l2_caputo_all,
    sampled_relative_error,
    solve,
)

# %%
# The number of exponentials grows only logarithmically with ``T / dt``.

print(f"{'eps':>8} {'T/dt':>8} {'N_q':>5} {'sampled error':>14}")
for eps in (1e-8, 1e-12):
    for ratio in (1e2, 1e4, 1e6, 1e8):
        soe = build_soe(0.5, eps, 1.0 / ratio, 1.0)
        print(f"{eps:8.0e} {ratio:8.0e} {soe.count:5d} {sampled_relative_error(soe):14.2e}")

# %%
# The fast operator agrees with the standard one to the SOE tolerance.

alpha = 0.6
mesh = build_graded_mesh(2000, (3 - alpha) / alpha, 1.0)
series = SeriesView.sample(mesh, lambda t: t**alpha + np.sin(t))
soe = build_soe(alpha, 1e-12, float(mesh.tau[2]), mesh.T)
std = l2_caputo_all(series, alpha)
fast = fast_l2_caputo_all(series, alpha, soe)
print()
print(f"max |fast - standard| = {np.max(np.abs(fast[1:] - std[1:])):.2e} with N_q = {soe.count}")

# %%
# In the solver the difference shows in the cost, not in the error.

print()
print(f"{'N':>6} {'standard s':>11} {'fast s':>8} {'err_max std':>12} {'err_max fast':>13}")
for N in (2000, 4000, 8000):
    prob = example_problem("ex2", alpha, N)
    a = solve(prob)
    b = solve(prob.replace(scheme="fast"))
    print(f"{N:6d} {a.wall_seconds:11.2f} {b.wall_seconds:8.2f} {a.err_max:12.4e} {b.err_max:13.4e}")
