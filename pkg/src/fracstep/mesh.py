"""Time meshes for the L2 schemes.

All coefficient formulas index into :class:`TimeMesh` through ``nodes[j]``
(:math:`t_j`) and ``tau[j]`` (:math:`\\tau_j = t_j - t_{j-1}`), so a mesh
stores its steps once and every consumer sees bit-identical values.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from fracstep.cancellation import DELTA0
from fracstep.exceptions import IndexRangeError, ParameterDomainError


@dataclass(frozen=True)
class TimeMesh:
    """Strictly increasing time nodes :math:`0 = t_0 < t_1 < \\dots < t_N`.

    ``tau`` has length ``N + 1`` with ``tau[0] = 0`` as padding, so that
    ``tau[j]`` is the j-th step for ``1 <= j <= N``.
    """

    nodes: np.ndarray
    tau: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        t = np.array(self.nodes, dtype=np.float64)
        if t.ndim != 1 or t.size < 2:
            raise ParameterDomainError("a mesh needs at least two nodes")
        if t[0] != 0.0:
            raise ParameterDomainError(f"mesh must start at t_0 = 0, got {t[0]!r}")
        if not np.all(np.isfinite(t)):
            raise ParameterDomainError("mesh nodes must be finite")
        tau = np.empty_like(t)
        tau[0] = 0.0
        np.subtract(t[1:], t[:-1], out=tau[1:])
        if not np.all(tau[1:] > 0.0):
            raise ParameterDomainError("mesh nodes must be strictly increasing")

        t.flags.writeable = False
        tau.flags.writeable = False
        object.__setattr__(self, "nodes", t)
        object.__setattr__(self, "tau", tau)

    @property
    def N(self) -> int:  # noqa: N802
        return self.nodes.size - 1

    @property
    def T(self) -> float:  # noqa: N802
        return float(self.nodes[-1])

    @property
    def steps(self) -> np.ndarray:
        """The steps :math:`\\tau_1, \\dots, \\tau_N`."""
        return self.tau[1:]

    def check_sum(self) -> bool:
        """Whether the steps add up to the horizon within ``4 N delta0 T``."""
        return abs(float(np.sum(self.steps)) - self.T) <= 4 * self.N * DELTA0 * self.T

    def to_csv(self, path: str | os.PathLike[str]) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"])
            for t in self.nodes:
                writer.writerow([f"{t:.16e}"])

    @classmethod
    def from_csv(cls, path: str | os.PathLike[str]) -> TimeMesh:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["t"]:
                raise ParameterDomainError(f"expected a single 't' column, got {header!r}")
            return cls(np.array([float(row[0]) for row in reader if row]))


def build_graded_mesh(N: int, r: float, T: float) -> TimeMesh:  # noqa: N803
    """Graded mesh :math:`t_j = (j/N)^r T`.

    :arg N: number of steps, at least 1.
    :arg r: grading exponent, ``r >= 1``; ``r = 1`` gives the uniform mesh.
    :arg T: final time.
    """
    if int(N) != N or N < 1:
        raise ParameterDomainError(f"N must be a positive integer, got {N!r}")
    if not r >= 1.0:
        raise ParameterDomainError(f"grading exponent must satisfy r >= 1, got {r!r}")
    if not T > 0.0:
        raise ParameterDomainError(f"horizon must be positive, got {T!r}")

    N = int(N)
    t = np.power(np.arange(N + 1, dtype=np.float64) / N, float(r)) * T
    t[0] = 0.0
    return TimeMesh(t)


def build_uniform_mesh(N: int, T: float) -> TimeMesh:  # noqa: N803
    return build_graded_mesh(N, 1.0, T)


def ratio_theta(mesh: TimeMesh, j: int, k: int) -> float:
    """Return :math:`\\tau_j / (t_k - t_{j-1})` for ``1 <= j <= k - 1 <= N - 1``."""
    if not 1 <= j <= k - 1 or k > mesh.N:
        raise IndexRangeError(f"need 1 <= j <= k-1 <= N-1, got j={j}, k={k}, N={mesh.N}")
    return float(mesh.tau[j] / (mesh.nodes[k] - mesh.nodes[j - 1]))
