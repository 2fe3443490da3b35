"""
Convergence on graded meshes
============================

For the subdiffusion benchmark with solution ``t^alpha (x^2 - 1)(y^2 - 1)``
the maximum error over time behaves like ``N^-min(r alpha, 3 - alpha)`` and
the final-time error like ``N^-min(r, 3 - alpha)``. The same table is
produced by ``fracstep convergence``.
"""

from __future__ import annotations

from fracstep import convergence_study, example_problem

alpha = 0.5
prob = example_problem("ex2", alpha, 100)
rows = convergence_study(prob, [100, 200, 400, 800], gradings=[1.0, 2.0, prob.r])

print(f"{'r':>6} {'N':>5} {'err_max':>11} {'rate':>6} {'expect':>6} {'err_T':>11} {'rate':>6} {'expect':>6}")
for row in rows:
    print(
        f"{row.r:6.2f} {row.N:5d} {row.err_max:11.4e} {row.rate_max:6.2f} {row.expected_max:6.2f} "
        f"{row.err_T:11.4e} {row.rate_T:6.2f} {row.expected_T:6.2f}"
    )
