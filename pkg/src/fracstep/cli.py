"""Command-line experiment runner.

Every subcommand reads the same configuration (a TOML/JSON file plus
``--set key=value`` overrides) and writes CSV files into ``--out``. Files
are written under temporary names and renamed only once the whole run
succeeded, so a failed run leaves no partial output behind.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import tempfile
import time
from typing import Any, Sequence

import numpy as np

from fracstep.config import RunSettings, load_config, parse_value
from fracstep.exceptions import ConfigError, FracstepError, NumericalFailure, StateError
from fracstep.l2core import coeff_last, coeff_row
from fracstep.mesh import build_graded_mesh
from fracstep.operators import SeriesView, caputo_power, fast_l2_caputo_all, l2_caputo_all
from fracstep.soefast import build_soe, sampled_relative_error
from fracstep.solver import convergence_study, solve

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4

SUBCOMMANDS = ("coeffs", "derivative", "soe-check", "solve", "convergence", "compare-modes")


class CheckFailed(FracstepError):
    """Raised when a ``[check]`` section does not match the computed result."""


# {{{ output


def fmt(x: float) -> str:
    """17 significant digits, enough to round-trip a double."""
    return f"{float(x):.16e}"


class Artifacts:
    """Collects CSV files in temporary locations until :meth:`commit`."""

    def __init__(self, outdir: str) -> None:
        self.outdir = outdir
        self.pending: list[tuple[str, str]] = []

    def write(self, name: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
        fd, tmp = tempfile.mkstemp(prefix=f".{name}.", suffix=".tmp", dir=self.outdir)
        self.pending.append((tmp, os.path.join(self.outdir, name)))
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])

    def commit(self) -> None:
        for tmp, final in self.pending:
            os.replace(tmp, final)
        self.pending.clear()

    def discard(self) -> None:
        for tmp, _ in self.pending:
            try:
                os.remove(tmp)
            except FileNotFoundError:
                pass
        self.pending.clear()


def _timing(args, header: list[str], row: list[Any], names: Sequence[str], values: Sequence[float]):
    if not args.no_timing:
        header.extend(names)
        row.extend(values)


def _check(settings: RunSettings, err_max: float, err_T: float) -> None:  # noqa: N803
    rtol = settings["check.rtol"]
    for key, got in (("check.err_max", err_max), ("check.err_T", err_T)):
        want = settings[key]
        if want is None:
            continue
        if not abs(got - want) <= rtol * abs(want):
            raise CheckFailed(f"{key}: expected {want:.6e} within rtol={rtol:g}, got {got:.6e}")
        print(f"check {key}: {got:.6e} vs {want:.6e} ok")


def _workers() -> int:
    value = os.environ.get("FRACSTEP_THREADS", "1")
    try:
        n = int(value)
    except ValueError as exc:
        raise ConfigError(f"FRACSTEP_THREADS must be an integer, got {value!r}") from exc
    return max(1, n)


# }}}

# {{{ subcommands


def _mesh(settings: RunSettings):
    return build_graded_mesh(settings.N, settings.grading(), settings.horizon())


def run_coeffs(settings: RunSettings, args, out: Artifacts) -> None:
    mesh = _mesh(settings)
    alpha = settings.alpha
    if settings["sample"] > 0:
        if mesh.N < 2:
            raise ConfigError("sampling coefficients needs N >= 2")
        rng = np.random.default_rng(settings["seed"])
        ks = np.sort(rng.integers(2, mesh.N + 1, size=settings["sample"]))
    else:
        k = mesh.N if settings["k"] is None else settings["k"]
        if not 1 <= k <= mesh.N:
            raise ConfigError(f"k must lie in [1, {mesh.N}], got {k}")
        ks = [k]

    rows = []
    mode = settings.mode
    for k in ks:
        k = int(k)
        if k >= 2:
            a, ct = coeff_row(mesh, k, alpha, settings.thresholds, mode)
            js = np.arange(1, k)
            theta = mesh.tau[js] / (mesh.nodes[k] - mesh.nodes[js - 1])
            for j, th, aj, cj in zip(js, theta, a, ct):
                rows.append(["history", int(j), k, th, aj, cj, mode.value, int(aj < 0 and cj > 0)])
        if k >= 2:
            last = coeff_last(mesh, k, alpha)
            rows.append(["last", k, k, 1.0, last.a_last, last.c_last, "closed", int(last.a_last > 0 and last.c_last > 0)])
    out.write("coeffs.csv", ["kind", "j", "k", "theta", "a", "c_tilde", "mode", "signs_ok"], rows)
    bad = sum(1 for r in rows if r[-1] != 1)
    print(f"wrote {len(rows)} coefficient rows, {bad} sign violations")


def run_derivative(settings: RunSettings, args, out: Artifacts) -> None:
    mesh = _mesh(settings)
    alpha, p = settings.alpha, settings["power"]
    if p < 0:
        raise ConfigError("power must be non-negative")
    series = SeriesView(mesh, np.power(mesh.nodes, p))
    if settings["operator"] == "fast":
        if mesh.N < 2:
            raise ConfigError("the fast operator needs N >= 2")
        dt = float(mesh.tau[2]) if settings["soe.dt"] == "tau2" else settings["soe.dt"]
        horizon = settings["soe.T"] or mesh.T
        soe = build_soe(alpha, settings["soe.eps"], dt, horizon)
        values = fast_l2_caputo_all(series, alpha, soe, settings.thresholds, settings.mode)
    else:
        values = l2_caputo_all(series, alpha, settings.thresholds, settings.mode)
    exact = caputo_power(p, alpha, mesh.nodes)
    rows = [
        [k, mesh.nodes[k], values[k], exact[k], abs(values[k] - exact[k])]
        for k in range(1, mesh.N + 1)
    ]
    out.write("derivative.csv", ["k", "t_k", "value", "exact", "error"], rows)
    print(f"max |error| = {max(r[-1] for r in rows):.6e}")


def run_soe_check(settings: RunSettings, args, out: Artifacts) -> None:
    T = settings["soe.T"] or settings.horizon()  # noqa: N806
    if settings["soe.dt"] == "tau2":
        mesh = _mesh(settings)
        if mesh.N < 2:
            raise ConfigError("soe.dt = 'tau2' needs N >= 2")
        dt = float(mesh.tau[2])
    else:
        dt = settings["soe.dt"]
    tic = time.perf_counter()
    soe = build_soe(settings.alpha, settings["soe.eps"], dt, T)
    seconds = time.perf_counter() - tic
    err = sampled_relative_error(soe)
    out.write(
        "soe.csv",
        ["l", "node", "weight"],
        [[i, s, w] for i, (s, w) in enumerate(zip(soe.nodes, soe.weights))],
    )
    ok = err <= soe.tol and np.all(soe.nodes > 0) and np.all(soe.weights > 0)
    print(f"N_q = {soe.count}")
    print(f"max relative error = {err:.6e} (eps = {soe.tol:.1e}) {'ok' if ok else 'FAILED'}")
    if not args.no_timing:
        print(f"construction seconds = {seconds:.3f}")
    if not ok:
        raise CheckFailed("exponential sum does not meet its tolerance")


def _report_rows(rep):
    return [[k, rep.times[k], rep.err_per_step[k - 1]] for k in range(1, rep.times.size)]


def run_solve(settings: RunSettings, args, out: Artifacts) -> None:
    problem = settings.problem()
    rep = solve(problem, thresholds=settings.thresholds)
    out.write("report.csv", ["k", "t_k", "err_tk"], _report_rows(rep))
    header, row = ["err_max", "err_T"], [rep.err_max, rep.err_T]
    _timing(args, header, row, ["seconds", "soe_seconds"], [rep.wall_seconds, rep.soe_seconds])
    out.write("summary.csv", header, [row])
    print(problem.name, f"N={problem.N}", f"err_max={rep.err_max:.6e}", f"err_T={rep.err_T:.6e}")
    _check(settings, rep.err_max, rep.err_T)


def run_convergence(settings: RunSettings, args, out: Artifacts) -> None:
    problem = settings.problem()
    Ns = settings["N"]  # noqa: N806
    if len(Ns) < 2:
        raise ConfigError("convergence needs a list of at least two N values")
    rows = convergence_study(
        problem, Ns, settings.gradings(), thresholds=settings.thresholds, workers=_workers()
    )
    header = ["N", "r", "err_max", "rate_max", "expected_max", "err_T", "rate_T", "expected_T"]
    data = []
    for row in rows:
        line = [row.N, row.r, row.err_max, row.rate_max, row.expected_max, row.err_T, row.rate_T, row.expected_T]
        _timing(args, header if not data else [], line, ["seconds"], [row.seconds])
        data.append(line)
    out.write("convergence.csv", header, data)
    for row in rows:
        print(
            f"N={row.N:7d} r={row.r:.4f} err_max={row.err_max:.4e} rate={row.rate_max:.4f} "
            f"err_T={row.err_T:.4e} rate={row.rate_T:.4f}"
        )


def run_compare_modes(settings: RunSettings, args, out: Artifacts) -> None:
    base = settings.problem()
    reports = {}
    for mode in ("gk", "tcte"):
        reports[mode] = solve(base.replace(mode=mode), thresholds=settings.thresholds)
    gk, tc = reports["gk"], reports["tcte"]
    diff = np.abs(gk.err_per_step - tc.err_per_step)
    out.write(
        "compare.csv",
        ["k", "t_k", "err_gk", "err_tcte", "diff"],
        [[k, gk.times[k], gk.err_per_step[k - 1], tc.err_per_step[k - 1], diff[k - 1]] for k in range(1, gk.times.size)],
    )
    header = ["mode", "err_max", "err_T"]
    rows = []
    for mode, rep in reports.items():
        row = [mode, rep.err_max, rep.err_T]
        _timing(args, header if not rows else [], row, ["seconds"], [rep.wall_seconds])
        rows.append(row)
    out.write("timing.csv", header, rows)
    print(f"max |err_gk - err_tcte| = {float(np.max(diff)):.6e}")
    if not args.no_timing:
        for mode, rep in reports.items():
            print(f"{mode:5s} seconds = {rep.wall_seconds:.3f}")


HANDLERS = {
    "coeffs": run_coeffs,
    "derivative": run_derivative,
    "soe-check": run_soe_check,
    "solve": run_solve,
    "convergence": run_convergence,
    "compare-modes": run_compare_modes,
}

# }}}

# {{{ entry point


def _overrides(pairs: Sequence[str]) -> dict[str, Any]:
    out = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = parse_value(value.strip())
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracstep", description="L2 Caputo schemes: experiments and audits")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("-c", "--config", help="TOML or JSON configuration file")
    parser.add_argument("-o", "--out", default=".", help="output directory (default: current directory)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    parser.add_argument("--seed", type=int, default=None, help="seed for sampled subcommands")
    parser.add_argument("--no-timing", action="store_true", help="omit timing columns from the CSV output")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")

    out = None
    try:
        overrides = _overrides(args.set)
        if args.seed is not None:
            overrides["seed"] = args.seed
        settings = load_config(args.config, overrides)
        if not os.path.isdir(args.out):
            os.makedirs(args.out, exist_ok=True)
        if not os.access(args.out, os.W_OK):
            raise ConfigError(f"output directory {args.out!r} is not writable")
        out = Artifacts(args.out)
        HANDLERS[args.subcommand](settings, args, out)
        out.commit()
        return EXIT_OK
    except ConfigError as exc:
        print(f"fracstep: config error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except CheckFailed as exc:
        print(f"fracstep: check failed: {exc}", file=sys.stderr)
        code = EXIT_CHECK
    except (NumericalFailure, StateError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"fracstep: numerical failure: {exc}", file=sys.stderr)
        code = EXIT_NUMERICAL
    except FracstepError as exc:
        # remaining library errors come from invalid parameters
        print(f"fracstep: config error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except OSError as exc:
        print(f"fracstep: cannot write output: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    if out is not None:
        out.discard()
    return code


# }}}
