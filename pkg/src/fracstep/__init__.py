"""Standard and fast L2 schemes for the Caputo derivative on nonuniform meshes,
with cancellation-safe coefficients and a subdiffusion solver.
"""

from __future__ import annotations

from fracstep.cancellation import (
    DEFAULT_THRESHOLDS,
    DELTA0,
    MachineParams,
    Thresholds,
    is_delta_cancellation,
    relative_difference_error,
    thresholds_from_delta,
)
from fracstep.exceptions import (
    ConfigError,
    FracstepError,
    IndexRangeError,
    NumericalFailure,
    ParameterDomainError,
    QuadratureError,
    SingularSystemError,
    SoeConstructionError,
    StateError,
)
from fracstep.l2core import (
    CoeffMode,
    coeff_last,
    coeff_last_gk,
    coeff_pair,
    coeff_row,
    eval_I,
    eval_I_direct,
    eval_I_taylor,
    truncation_number,
)
from fracstep.mesh import TimeMesh, build_graded_mesh, build_uniform_mesh
from fracstep.operators import (
    SeriesView,
    caputo_power,
    fast_l2_caputo,
    fast_l2_caputo_all,
    l2_caputo,
    l2_caputo_all,
)
from fracstep.quadrature import QuadResult, adaptive_gk, gk15, oracle_eval
from fracstep.soefast import (
    FastHistoryState,
    SoeApproximation,
    build_soe,
    eval_J,
    eval_J_direct,
    eval_J_taylor,
    fast_coeff_pair,
    fast_coeff_row,
    sampled_relative_error,
    update_history,
)
from fracstep.solver import (
    ProblemSpec,
    Scheme,
    SolveReport,
    build_grid,
    convergence_study,
    example_problem,
    expected_rates,
    observed_rate,
    optimal_grading,
    solve,
)

__all__ = [
    "DEFAULT_THRESHOLDS",
    "DELTA0",
    "CoeffMode",
    "ConfigError",
    "FastHistoryState",
    "FracstepError",
    "IndexRangeError",
    "MachineParams",
    "NumericalFailure",
    "ParameterDomainError",
    "ProblemSpec",
    "QuadResult",
    "QuadratureError",
    "Scheme",
    "SeriesView",
    "SingularSystemError",
    "SoeApproximation",
    "SoeConstructionError",
    "SolveReport",
    "StateError",
    "Thresholds",
    "TimeMesh",
    "adaptive_gk",
    "build_graded_mesh",
    "build_grid",
    "build_soe",
    "build_uniform_mesh",
    "caputo_power",
    "coeff_last",
    "coeff_last_gk",
    "coeff_pair",
    "coeff_row",
    "convergence_study",
    "eval_I",
    "eval_I_direct",
    "eval_I_taylor",
    "eval_J",
    "eval_J_direct",
    "eval_J_taylor",
    "example_problem",
    "expected_rates",
    "fast_coeff_pair",
    "fast_coeff_row",
    "fast_l2_caputo",
    "fast_l2_caputo_all",
    "gk15",
    "is_delta_cancellation",
    "l2_caputo",
    "l2_caputo_all",
    "observed_rate",
    "oracle_eval",
    "optimal_grading",
    "relative_difference_error",
    "sampled_relative_error",
    "solve",
    "thresholds_from_delta",
    "truncation_number",
    "update_history",
]
