"""
Why the coefficients need care on graded meshes
===============================================

The history coefficients of the L2 scheme contain differences such as
``1 - (1 - theta)^(1 - alpha)`` with ``theta = tau_j / (t_k - t_{j-1})``.
On a strongly graded mesh ``theta`` reaches ``1e-16`` and below, and the
closed form returns rounding noise. Switching to a truncated Taylor series
below a small threshold removes the cancellation.
"""

from __future__ import annotations

import numpy as np

from fracstep import (
    CoeffMode,
    Thresholds,
    build_graded_mesh,
    coeff_row,
    eval_I_direct,
    eval_I_taylor,
    example_problem,
    oracle_eval,
    solve,
)

alpha = 0.4

# %%
# Kernel values against a 50-digit reference.

print(f"{'theta':>8} {'direct I2 rel.err':>18} {'Taylor I2 rel.err':>18}")
for theta in (1e-2, 1e-4, 1e-6, 1e-8):
    ref = oracle_eval("I2", theta=theta, d=1.0, alpha=alpha)
    d = eval_I_direct(theta, 1.0, alpha).I2
    s = eval_I_taylor(theta, 1.0, alpha).I2
    print(f"{theta:8.0e} {abs(d / ref - 1):18.2e} {abs(s / ref - 1):18.2e}")

# %%
# A whole coefficient row on the mesh of the first benchmark (``r = 2 / alpha``).

N = 3200
mesh = build_graded_mesh(N, 2 / alpha, 1.0)
k = N
a_tcte, _ = coeff_row(mesh, k, alpha)
a_direct, _ = coeff_row(mesh, k, alpha, Thresholds.direct(), CoeffMode.DIRECT)
js = np.arange(1, 6)
print()
print(f"{'j':>3} {'theta':>10} {'a (TCTE)':>22} {'a (direct)':>22}")
for j in js:
    theta = mesh.tau[j] / (mesh.nodes[k] - mesh.nodes[j - 1])
    print(f"{j:3d} {theta:10.2e} {a_tcte[j - 1]:22.15e} {a_direct[j - 1]:22.15e}")

# %%
# The noise is amplified by the time stepping. With thresholds set to zero
# the error grows with N instead of decreasing.

print()
print(f"{'N':>6} {'err_max direct':>16} {'err_max TCTE':>14}")
for N in (100, 200, 400):
    prob = example_problem("ex1", alpha, N, r=2 / alpha, space_n=12)
    direct = solve(prob.replace(mode=CoeffMode.DIRECT), thresholds=Thresholds.direct())
    tcte = solve(prob)
    print(f"{N:6d} {direct.err_max:16.4e} {tcte.err_max:14.4e}")
