"""Experiment configuration: TOML or JSON files with a fixed set of keys.

Nested tables are flattened with dots, so ``[soe] eps = 1e-12`` and
``"soe.eps": 1e-12`` are the same key. Unknown keys are rejected.
"""

from __future__ import annotations

import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from fracstep.cancellation import DEFAULT_THRESHOLDS, Thresholds
from fracstep.exceptions import ConfigError, FracstepError
from fracstep.l2core import CoeffMode
from fracstep.solver import ProblemSpec, Scheme, example_problem, optimal_grading


def _number(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{key}: expected a finite number, got {value!r}")
    return float(value)


def _integer(value: Any, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    return int(value)


def _int_list(value: Any, key: str) -> list[int]:
    if isinstance(value, list):
        return [_integer(v, key) for v in value]
    return [_integer(value, key)]


def _grading(value: Any, key: str) -> float | str:
    if isinstance(value, str):
        if value != "optimal":
            raise ConfigError(f"{key}: the only named grading is 'optimal', got {value!r}")
        return value
    return _number(value, key)


def _grading_list(value: Any, key: str) -> list[float | str]:
    if isinstance(value, list):
        return [_grading(v, key) for v in value]
    return [_grading(value, key)]


def _choice(*options: str):
    def check(value: Any, key: str) -> str:
        if value not in options:
            raise ConfigError(f"{key}: expected one of {', '.join(options)}, got {value!r}")
        return value

    return check


def _soe_dt(value: Any, key: str) -> float | str:
    if value == "tau2":
        return value
    return _number(value, key)


def _optional_number(value: Any, key: str) -> float | None:
    return None if value is None else _number(value, key)


#: key -> (validator, default)
SCHEMA: dict[str, tuple[Any, Any]] = {
    "example": (_choice("ex1", "ex2", "custom"), "ex2"),
    "alpha": (_number, 0.6),
    "T": (_optional_number, None),
    "N": (_int_list, [2000]),
    "r": (_grading_list, ["optimal"]),
    "scheme": (_choice("standard", "fast"), "standard"),
    "mode": (_choice("direct", "tcte", "gk"), "tcte"),
    "theta_s1": (_number, DEFAULT_THRESHOLDS.theta_s1),
    "theta_s2": (_number, DEFAULT_THRESHOLDS.theta_s2),
    "theta_f1": (_number, DEFAULT_THRESHOLDS.theta_f1),
    "theta_f2": (_number, DEFAULT_THRESHOLDS.theta_f2),
    "soe.eps": (_number, 1e-12),
    "soe.T": (_optional_number, None),
    "soe.dt": (_soe_dt, "tau2"),
    "space.n": (lambda v, k: None if v is None else _integer(v, k), None),
    "k": (lambda v, k: None if v is None else _integer(v, k), None),
    "sample": (_integer, 0),
    "power": (_number, 2.0),
    "operator": (_choice("standard", "fast"), "standard"),
    "seed": (_integer, 0),
    "check.err_max": (_optional_number, None),
    "check.err_T": (_optional_number, None),
    "check.rtol": (_number, 0.01),
}


def _flatten(data: dict, prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def parse_value(text: str) -> Any:
    """Parse a ``--set`` value: JSON if possible, otherwise the bare string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


@dataclass
class RunSettings:
    values: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @property
    def alpha(self) -> float:
        return self.values["alpha"]

    @property
    def thresholds(self) -> Thresholds:
        try:
            return Thresholds(*(self.values[k] for k in ("theta_s1", "theta_s2", "theta_f1", "theta_f2")))
        except FracstepError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def mode(self) -> CoeffMode:
        return CoeffMode.parse(self.values["mode"])

    def horizon(self) -> float:
        if self.values["T"] is not None:
            return self.values["T"]
        return 10.0 if self.values["example"] == "ex2" else 1.0

    def grading(self, r: float | str | None = None) -> float:
        r = self.values["r"][0] if r is None else r
        value = optimal_grading(self.alpha) if r == "optimal" else float(r)
        if value < 1.0:
            raise ConfigError(f"r: grading must be >= 1, got {value!r}")
        return value

    def gradings(self) -> list[float]:
        return [self.grading(r) for r in self.values["r"]]

    @property
    def N(self) -> int:  # noqa: N802
        return self.values["N"][0]

    def problem(self, N: int | None = None, r: float | None = None) -> ProblemSpec:  # noqa: N803
        example = self.values["example"]
        if example == "custom":
            raise ConfigError("PDE subcommands need example = 'ex1' or 'ex2'")
        kwargs: dict[str, Any] = {
            "scheme": Scheme.parse(self.values["scheme"]),
            "mode": self.mode,
            "soe_eps": self.values["soe.eps"],
            "soe_T": self.values["soe.T"],
            "soe_dt": None if self.values["soe.dt"] == "tau2" else self.values["soe.dt"],
        }
        if self.values["space.n"] is not None:
            kwargs["space_n"] = self.values["space.n"]
        try:
            return example_problem(
                example,
                self.alpha,
                self.N if N is None else N,
                r=self.grading() if r is None else r,
                T=self.horizon(),
                **kwargs,
            )
        except FracstepError as exc:
            raise ConfigError(str(exc)) from exc


def validate(raw: dict[str, Any]) -> RunSettings:
    flat = _flatten(raw)
    unknown = sorted(set(flat) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    values = {}
    for key, (check, default) in SCHEMA.items():
        values[key] = check(flat[key], key) if key in flat else default
    if not 0.0 < values["alpha"] < 1.0:
        raise ConfigError(f"alpha: must lie in (0, 1), got {values['alpha']!r}")
    if values["T"] is not None and not values["T"] > 0:
        raise ConfigError("T: must be positive")
    if any(n < 1 for n in values["N"]):
        raise ConfigError("N: every entry must be a positive integer")
    return RunSettings(values)


def load_config(path: str | os.PathLike[str] | None, overrides: dict[str, Any] | None = None) -> RunSettings:
    """Read a TOML/JSON file (if given), apply ``overrides`` and validate."""
    raw: dict[str, Any] = {}
    if path is not None:
        path = os.fspath(path)
        try:
            with open(path, "rb") as fh:
                if path.endswith(".json"):
                    raw = json.load(fh)
                else:
                    raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
        except (ValueError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot parse config file {path!r}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config file must contain a table/object at the top level")
    flat = _flatten(raw)
    flat.update(overrides or {})
    return validate(flat)
