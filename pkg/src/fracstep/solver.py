"""Implicit L2 time stepping for the 2D linear subdiffusion problem

.. math::

    \\partial_t^\\alpha u = \\Delta u + f \\quad \\text{on } [-1, 1]^2,
    \\qquad u = 0 \\text{ on the boundary},

with Chebyshev-Gauss-Lobatto collocation in space.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import lapack

from fracstep.cancellation import DEFAULT_THRESHOLDS, Thresholds
from fracstep.exceptions import ParameterDomainError, SingularSystemError
from fracstep.l2core import CoeffMode, coeff_last, coeff_row
from fracstep.mesh import TimeMesh, build_graded_mesh
from fracstep.soefast import SoeApproximation, advance_history, build_soe, fast_coeff_row

log = logging.getLogger(__name__)

Field = Callable[..., np.ndarray]


class Scheme(str, enum.Enum):
    STANDARD = "standard"
    FAST = "fast"

    @classmethod
    def parse(cls, value: str | Scheme) -> Scheme:
        try:
            return cls(str(getattr(value, "value", value)).strip().lower())
        except ValueError:
            raise ParameterDomainError(f"unknown scheme {value!r}") from None


# {{{ space


def cheb_diff(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Chebyshev-Gauss-Lobatto nodes (ascending) and first-derivative matrix."""
    if n < 2:
        raise ParameterDomainError(f"need at least 2 points, got {n}")
    N = n - 1  # noqa: N806
    x = np.cos(np.pi * np.arange(n) / N)
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n)
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(n))  # noqa: N806
    D -= np.diag(D.sum(axis=1))
    return x[::-1].copy(), D[::-1, ::-1].copy()


def clenshaw_curtis_weights(n: int) -> np.ndarray:
    """Clenshaw-Curtis weights on the ascending CGL nodes of :func:`cheb_diff`."""
    N = n - 1  # noqa: N806
    theta = np.pi * np.arange(n) / N
    w = np.zeros(n)
    inner = np.arange(1, N)
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N * N - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(N * theta[inner]) / (N * N - 1)
    else:
        w[0] = w[N] = 1.0 / (N * N)
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2.0 * v / N
    return w[::-1].copy()


@dataclass(frozen=True)
class SpatialGrid:
    """Tensor CGL grid on ``[-1, 1]^2``; unknowns live on the interior nodes,
    flattened with the x index varying slowest.
    """

    n: int
    nodes: np.ndarray
    diff: np.ndarray
    laplacian: np.ndarray
    weights: np.ndarray
    X: np.ndarray  # noqa: N815
    Y: np.ndarray  # noqa: N815

    @property
    def size(self) -> int:
        return (self.n - 2) ** 2

    def l2_norm(self, values: np.ndarray) -> float:
        """Discrete L2 norm of interior values (zero on the boundary)."""
        w = self.weights[1:-1]
        e = np.asarray(values).reshape(self.n - 2, self.n - 2)
        return math.sqrt(float(np.einsum("i,j,ij->", w, w, e * e)))


def build_grid(n: int) -> SpatialGrid:
    if int(n) != n or n < 3:
        raise ParameterDomainError(f"need n >= 3 points per dimension, got {n!r}")
    n = int(n)
    x, D = cheb_diff(n)  # noqa: N806
    D2 = (D @ D)[1:-1, 1:-1]  # noqa: N806
    eye = np.eye(n - 2)
    lap = np.kron(D2, eye) + np.kron(eye, D2)
    X, Y = np.meshgrid(x[1:-1], x[1:-1], indexing="ij")  # noqa: N806
    return SpatialGrid(n, x, D, lap, clenshaw_curtis_weights(n), X.ravel(), Y.ravel())


# }}}

# {{{ problems


@dataclass(frozen=True)
class ProblemSpec:
    alpha: float
    T: float  # noqa: N815
    N: int  # noqa: N815
    r: float
    forcing: Field
    initial: Field
    exact: Field | None = None
    scheme: Scheme = Scheme.STANDARD
    mode: CoeffMode = CoeffMode.TCTE
    soe_eps: float = 1e-12
    #: SOE cut-off; ``None`` selects the second step tau_2
    soe_dt: float | None = None
    #: SOE horizon; ``None`` selects T
    soe_T: float | None = None  # noqa: N815
    name: str = "custom"
    space_n: int = 20

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ParameterDomainError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        object.__setattr__(self, "mode", CoeffMode.parse(self.mode))

    def mesh(self) -> TimeMesh:
        return build_graded_mesh(self.N, self.r, self.T)

    def replace(self, **changes) -> ProblemSpec:
        return dataclasses.replace(self, **changes)

    def describe(self) -> dict:
        return {
            "example": self.name,
            "alpha": self.alpha,
            "T": self.T,
            "N": self.N,
            "r": self.r,
            "scheme": self.scheme.value,
            "mode": self.mode.value,
            "soe_eps": self.soe_eps,
            "soe_dt": self.soe_dt,
            "soe_T": self.soe_T,
            "space_n": self.space_n,
        }


def optimal_grading(alpha: float) -> float:
    """The grading ``(3 - alpha) / alpha`` that restores the optimal rate."""
    return (3.0 - alpha) / alpha


def example_problem(name: str, alpha: float, N: int, r: float | None = None, T: float | None = None, **kwargs) -> ProblemSpec:  # noqa: N803
    """The two benchmark problems.

    ``ex1``: ``u = t^alpha sin(pi x) sin(pi y)`` with ``T = 1`` and 20 points per
    dimension. ``ex2``: ``u = t^alpha (x^2 - 1)(y^2 - 1)`` with ``T = 10`` and 5
    points per dimension. ``r`` defaults to :func:`optimal_grading`.
    """
    g1 = math.gamma(1.0 + alpha)
    if r is None:
        r = optimal_grading(alpha)

    if name == "ex1":

        def shape(x, y):
            return np.sin(np.pi * x) * np.sin(np.pi * y)

        def forcing(t, x, y):
            return (g1 + 2.0 * np.pi**2 * t**alpha) * shape(x, y)

        defaults = {"T": 1.0, "space_n": 20}
    elif name == "ex2":

        def shape(x, y):
            return (x * x - 1.0) * (y * y - 1.0)

        def forcing(t, x, y):
            return g1 * shape(x, y) - 2.0 * t**alpha * (x * x + y * y - 2.0)

        defaults = {"T": 10.0, "space_n": 5}
    else:
        raise ParameterDomainError(f"unknown example {name!r}; expected 'ex1' or 'ex2'")

    def exact(t, x, y):
        return t**alpha * shape(x, y)

    def initial(x, y):
        return np.zeros_like(x)

    kwargs.setdefault("space_n", defaults["space_n"])
    return ProblemSpec(
        alpha=alpha,
        T=defaults["T"] if T is None else T,
        N=N,
        r=r,
        forcing=forcing,
        initial=initial,
        exact=exact,
        name=name,
        **kwargs,
    )


# }}}

# {{{ solve


@dataclass
class SolveReport:
    times: np.ndarray
    #: ``err_per_step[k - 1]`` is the L2 error at ``t_k``
    err_per_step: np.ndarray
    err_max: float
    err_T: float  # noqa: N815
    wall_seconds: float
    soe_seconds: float = 0.0
    soe_count: int = 0
    config: dict = field(default_factory=dict)
    solutions: np.ndarray | None = None


def _step_solve(shift: float, lap: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(shift I - lap) u = rhs`` with one LAPACK ``gesv`` call."""
    A = -lap  # noqa: N806
    A.flat[:: A.shape[0] + 1] += shift
    _, _, u, info = lapack.dgesv(A, rhs, overwrite_a=1)
    if info > 0 or not np.all(np.isfinite(u)):
        raise SingularSystemError(f"time-step operator is singular (shift={shift!r})")
    return u


def prepare_soe(problem: ProblemSpec, mesh: TimeMesh) -> SoeApproximation:
    dt = problem.soe_dt if problem.soe_dt is not None else float(mesh.tau[2])
    horizon = problem.soe_T if problem.soe_T is not None else problem.T
    return build_soe(problem.alpha, problem.soe_eps, dt, horizon)


def solve(
    problem: ProblemSpec,
    grid: SpatialGrid | None = None,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    *,
    keep_solutions: bool = False,
    soe: SoeApproximation | None = None,
    gk_rtol: float = 1e-14,
) -> SolveReport:
    """Run the implicit standard or fast L2 scheme and report L2 errors.

    Each step solves ``(s_k I - Lap) u^k = f(t_k) + s_k u^{k-1} - history``,
    where ``s_k`` collects every coefficient multiplying ``u^k``.
    """
    if grid is None:
        grid = build_grid(problem.space_n)
    mesh = problem.mesh()
    t, tau = mesh.nodes, mesh.tau
    alpha = problem.alpha
    N = mesh.N  # noqa: N806
    g1a = math.gamma(1.0 - alpha)
    X, Y, lap = grid.X, grid.Y, grid.laplacian  # noqa: N806
    m = grid.size
    fast = problem.scheme is Scheme.FAST

    soe_seconds = 0.0
    if fast and N >= 2 and soe is None:
        tic = time.perf_counter()
        soe = prepare_soe(problem, mesh)
        soe_seconds = time.perf_counter() - tic
        log.info("SOE with %d nodes (achieved %.2e)", soe.count, soe.achieved)

    u_prev = np.asarray(problem.initial(X, Y), dtype=np.float64).reshape(m)
    du = np.zeros((N + 1, m)) if not fast else None
    d_prev = np.zeros(m)
    H = np.zeros((soe.count, m)) if fast and soe is not None else None  # noqa: N806
    sols = np.empty((N + 1, m)) if keep_solutions else None
    if sols is not None:
        sols[0] = u_prev
    errs = np.full(N, np.nan)

    # rho_all[j] = tau_j / tau_{j+1}
    rho_all = np.concatenate([[np.nan], tau[1:-1] / tau[2:]])

    tic = time.perf_counter()
    for k in range(1, N + 1):
        fk = np.asarray(problem.forcing(t[k], X, Y), dtype=np.float64).reshape(m)
        if k == 1:
            shift = 1.0 / (math.gamma(2.0 - alpha) * tau[1] ** alpha)
            rhs = fk + shift * u_prev
        else:
            last = coeff_last(mesh, k, alpha)
            rho = tau[k - 1] / tau[k]
            if fast:
                a, ct = fast_coeff_row(mesh, k, soe.nodes, thresholds, problem.mode, gk_rtol=gk_rtol)
                decay = np.exp(-soe.nodes * tau[k])
                w = soe.weights
                s_total = last.c_last + float(w @ (a * rho + ct))
                known = (w * decay) @ H - (float(w @ a) + last.a_last) * d_prev
            else:
                a, ct = coeff_row(mesh, k, alpha, thresholds, problem.mode, gk_rtol=gk_rtol)
                rhos = rho_all[1:k]
                s_total = last.c_last + a[-1] * rhos[-1] + ct[-1]
                wts = -a
                wts[1:] += a[:-1] * rhos[:-1] + ct[:-1]
                wts[-1] -= last.a_last
                known = wts @ du[1:k]
            shift = s_total / g1a
            rhs = fk + shift * u_prev - known / g1a

        u = _step_solve(shift, lap, rhs)
        d_curr = u - u_prev

        if fast:
            if k >= 2:
                advance_history(H, decay, a, ct, rho, d_prev, d_curr)
        else:
            du[k] = d_curr
        if sols is not None:
            sols[k] = u
        if problem.exact is not None:
            ex = np.asarray(problem.exact(t[k], X, Y)).reshape(m)
            errs[k - 1] = grid.l2_norm(ex - u)
        d_prev = d_curr
        u_prev = u
    wall = time.perf_counter() - tic

    config = problem.describe()
    config.update(thresholds.as_dict())
    return SolveReport(
        times=t.copy(),
        err_per_step=errs,
        err_max=float(np.max(errs)) if problem.exact is not None else math.nan,
        err_T=float(errs[-1]) if problem.exact is not None else math.nan,
        wall_seconds=wall,
        soe_seconds=soe_seconds,
        soe_count=soe.count if soe is not None else 0,
        config=config,
        solutions=sols,
    )


# }}}

# {{{ convergence


@dataclass(frozen=True)
class ConvergenceRow:
    N: int  # noqa: N815
    r: float
    err_max: float
    err_T: float  # noqa: N815
    rate_max: float
    rate_T: float  # noqa: N815
    expected_max: float
    expected_T: float  # noqa: N815
    seconds: float


def observed_rate(err_coarse: float, err_fine: float, n_coarse: int, n_fine: int) -> float:
    """``log(err_coarse / err_fine) / log(n_fine / n_coarse)``; log2 ratio for doubling."""
    return math.log(err_coarse / err_fine) / math.log(n_fine / n_coarse)


def expected_rates(alpha: float, r: float) -> tuple[float, float]:
    """Predicted rates of the maximum error and of the final-time error."""
    return min(r * alpha, 3.0 - alpha), min(r, 3.0 - alpha)


def convergence_study(
    problem: ProblemSpec,
    Ns: Sequence[int],  # noqa: N803
    gradings: Sequence[float] | None = None,
    grid: SpatialGrid | None = None,
    thresholds: Thresholds = DEFAULT_THRESHOLDS,
    *,
    workers: int = 1,
) -> list[ConvergenceRow]:
    """Run ``problem`` for every ``N`` (and every grading) and tabulate rates."""
    Ns = sorted(int(n) for n in Ns)  # noqa: N806
    if len(Ns) < 2:
        raise ParameterDomainError("a convergence study needs at least two values of N")
    if gradings is None:
        gradings = [problem.r]
    if grid is None:
        grid = build_grid(problem.space_n)

    jobs = [(r, n) for r in gradings for n in Ns]

    def run(job):
        r, n = job
        return solve(problem.replace(N=n, r=r), grid, thresholds)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, jobs))
    else:
        reports = [run(job) for job in jobs]

    rows = []
    for i, ((r, n), rep) in enumerate(zip(jobs, reports)):
        exp_max, exp_T = expected_rates(problem.alpha, r)  # noqa: N806
        if i > 0 and jobs[i - 1][0] == r:
            prev_n, prev = jobs[i - 1][1], reports[i - 1]
            rate_max = observed_rate(prev.err_max, rep.err_max, prev_n, n)
            rate_T = observed_rate(prev.err_T, rep.err_T, prev_n, n)  # noqa: N806
        else:
            rate_max = rate_T = math.nan  # noqa: N806
        rows.append(
            ConvergenceRow(n, r, rep.err_max, rep.err_T, rate_max, rate_T, exp_max, exp_T, rep.wall_seconds)
        )
    return rows


# }}}
