"""
Accuracy of the L2 Caputo approximation
=======================================

The L2 scheme interpolates the solution by piecewise quadratics, so it is exact
for quadratics (after the first step, which only sees two nodes). For the
typical solution behaviour ``u = t^alpha`` the error at the final time decays
like ``N^(alpha - 3)`` once the mesh is graded with ``r = (3 - alpha) / alpha``.
"""

from __future__ import annotations

import numpy as np

from fracstep import SeriesView, build_graded_mesh, caputo_power, l2_caputo_all

alpha = 0.4

# %%
# Quadratics are reproduced to rounding error from the second step on.

mesh = build_graded_mesh(64, 3.0, 1.0)
t = mesh.nodes
approx = l2_caputo_all(SeriesView(mesh, t**2), alpha)
exact = caputo_power(2.0, alpha, t)
print(f"t^2: max relative error for k >= 2: {np.max(np.abs(approx[2:] / exact[2:] - 1)):.2e}")
print(f"t^2: ratio at k = 1 (linear first step): {approx[1] / exact[1]:.6f} = (2 - alpha) / 2")

# %%
# For ``t^alpha`` compare a uniform mesh with the optimally graded one.

print()
print(f"{'N':>6} {'uniform':>12} {'rate':>6} {'graded':>12} {'rate':>6}")
prev = None
for N in (50, 100, 200, 400, 800):
    errs = []
    for r in (1.0, (3 - alpha) / alpha):
        mesh = build_graded_mesh(N, r, 1.0)
        values = l2_caputo_all(SeriesView.sample(mesh, lambda s: s**alpha), alpha)
        errs.append(abs(values[-1] - caputo_power(alpha, alpha, 1.0)))
    if prev is None:
        print(f"{N:6d} {errs[0]:12.4e} {'':>6} {errs[1]:12.4e}")
    else:
        rates = np.log2(np.array(prev) / np.array(errs))
        print(f"{N:6d} {errs[0]:12.4e} {rates[0]:6.2f} {errs[1]:12.4e} {rates[1]:6.2f}")
    prev = errs
