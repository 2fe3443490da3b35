from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from fracstep import cli
from fracstep.config import load_config, validate
from fracstep.exceptions import ConfigError, SingularSystemError


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path)])


# {{{ config


def test_config_defaults_and_flattening(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('example = "ex1"\nalpha = 0.4\nN = [100, 200]\n[soe]\neps = 1e-10\n[space]\nn = 8\n')
    settings = load_config(path)
    assert settings["soe.eps"] == 1e-10
    assert settings["space.n"] == 8
    assert settings["N"] == [100, 200]
    assert settings.grading() == pytest.approx(2.6 / 0.4)
    prob = settings.problem()
    assert (prob.T, prob.space_n, prob.N) == (1.0, 8, 100)

    jpath = tmp_path / "run.json"
    jpath.write_text(json.dumps({"example": "ex1", "alpha": 0.4, "soe": {"eps": 1e-10}}))
    assert load_config(jpath)["soe.eps"] == 1e-10


@pytest.mark.parametrize(
    "raw",
    [
        {"bogus": 1},
        {"soe": {"tolerance": 1e-8}},
        {"alpha": 1.5},
        {"alpha": "half"},
        {"N": 2.5},
        {"N": [0, 10]},
        {"r": "steep"},
        {"scheme": "slow"},
        {"mode": "simpson"},
        {"example": "ex9"},
        {"theta_s1": True},
        {"T": -1.0},
    ],
)
def test_config_rejects(raw):
    with pytest.raises(ConfigError):
        validate(raw)


def test_config_rejects_bad_grading_and_thresholds():
    with pytest.raises(ConfigError):
        validate({"r": 0.5}).grading()
    with pytest.raises(ConfigError):
        _ = validate({"theta_s1": -1.0}).thresholds
    with pytest.raises(ConfigError):
        validate({"example": "custom"}).problem()


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(arr)


# }}}

# {{{ subcommands


def test_solve_writes_report(tmp_path, capsys):
    code = run(tmp_path, "solve", "--set", "example=ex2", "--set", "N=200", "--set", "alpha=0.6")
    assert code == 0
    report = read_csv(tmp_path / "report.csv")
    assert len(report) == 200
    assert list(report[0]) == ["k", "t_k", "err_tk"]
    summary = read_csv(tmp_path / "summary.csv")[0]
    assert set(summary) == {"err_max", "err_T", "seconds", "soe_seconds"}
    assert float(summary["err_max"]) == max(float(r["err_tk"]) for r in report)
    # 17 significant digits
    assert len(summary["err_max"].split("e")[0].replace(".", "")) == 17
    assert not list(tmp_path.glob(".*tmp"))


def test_outputs_are_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["solve", "--set", "N=100", "--set", "scheme=\"fast\"", "--no-timing", "--out", str(out)]) == 0
    for name in ("report.csv", "summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert "seconds" not in (a / "summary.csv").read_text()


def test_coeffs_uniform(tmp_path):
    code = run(
        tmp_path, "coeffs", "--set", "example=custom", "--set", "N=4", "--set", "r=1",
        "--set", "alpha=0.5", "--set", "k=4",
    )
    assert code == 0
    rows = read_csv(tmp_path / "coeffs.csv")
    assert [r["kind"] for r in rows] == ["history"] * 3 + ["last"]
    assert all(r["signs_ok"] == "1" for r in rows)
    assert [int(r["j"]) for r in rows[:3]] == [1, 2, 3]
    assert float(rows[2]["theta"]) == 0.5


def test_coeffs_sampling_depends_on_seed(tmp_path):
    outs = []
    for seed in (3, 3, 4):
        out = tmp_path / f"s{len(outs)}"
        assert cli.main(["coeffs", "--set", "N=300", "--set", "sample=4", "--seed", str(seed), "--out", str(out)]) == 0
        outs.append((out / "coeffs.csv").read_bytes())
    assert outs[0] == outs[1]
    assert outs[0] != outs[2]


def test_derivative(tmp_path):
    for op in ("standard", "fast"):
        code = run(
            tmp_path, "derivative", "--set", "example=custom", "--set", "N=60", "--set", "r=2",
            "--set", "power=2", "--set", f"operator={op}",
        )
        assert code == 0
        rows = read_csv(tmp_path / "derivative.csv")
        assert len(rows) == 60
        assert max(float(r["error"]) for r in rows[1:]) < 1e-10


def test_soe_check(tmp_path, capsys):
    code = run(tmp_path, "soe-check", "--set", "alpha=0.5", "--set", "soe.dt=1e-4", "--set", "soe.T=1", "--set", "soe.eps=1e-12")
    assert code == 0
    out = capsys.readouterr().out
    assert "N_q = " in out
    err = float(out.split("max relative error = ")[1].split()[0])
    assert err <= 1e-12
    rows = read_csv(tmp_path / "soe.csv")
    assert all(float(r["node"]) > 0 and float(r["weight"]) > 0 for r in rows)


def test_convergence(tmp_path, monkeypatch):
    monkeypatch.setenv("FRACSTEP_THREADS", "2")
    code = run(tmp_path, "convergence", "--set", "N=[100,200]", "--set", "r=[\"optimal\", 2]", "--no-timing")
    assert code == 0
    rows = read_csv(tmp_path / "convergence.csv")
    assert len(rows) == 4
    assert "seconds" not in rows[0]
    assert float(rows[1]["rate_max"]) == pytest.approx(2.4, abs=0.1)
    assert run(tmp_path, "convergence", "--set", "N=100") == cli.EXIT_CONFIG
    monkeypatch.setenv("FRACSTEP_THREADS", "many")
    assert run(tmp_path, "convergence", "--set", "N=[100,200]") == cli.EXIT_CONFIG


def test_compare_modes(tmp_path):
    code = run(tmp_path, "compare-modes", "--set", "example=ex1", "--set", "N=40", "--set", "space.n=8")
    assert code == 0
    rows = read_csv(tmp_path / "compare.csv")
    assert max(float(r["diff"]) for r in rows) <= 1e-13
    timing = read_csv(tmp_path / "timing.csv")
    assert [r["mode"] for r in timing] == ["gk", "tcte"]
    assert "seconds" in timing[0]


# }}}

# {{{ failures


def test_exit_codes(tmp_path, monkeypatch):
    assert run(tmp_path, "solve", "--set", "bogus=1") == cli.EXIT_CONFIG
    assert run(tmp_path, "solve", "--set", "novalue") == cli.EXIT_CONFIG
    assert run(tmp_path, "frobnicate") == cli.EXIT_CONFIG
    assert run(tmp_path, "solve", "--set", "example=custom") == cli.EXIT_CONFIG
    assert run(tmp_path, "soe-check", "--set", "soe.eps=1e-20", "--set", "soe.dt=1e-4") == cli.EXIT_CONFIG
    assert list(tmp_path.iterdir()) == []

    def broken(*args, **kwargs):
        raise SingularSystemError("singular")

    monkeypatch.setattr(cli, "solve", broken)
    assert run(tmp_path, "solve", "--set", "N=10") == cli.EXIT_NUMERICAL


def test_check_failure_leaves_no_output(tmp_path, capsys):
    args = ["solve", "--set", "N=100", "--set", "check.err_max=1.0"]
    assert run(tmp_path, *args) == cli.EXIT_CHECK
    assert list(tmp_path.iterdir()) == []
    assert "check failed" in capsys.readouterr().err


def test_check_success(tmp_path):
    # a config with a [check] section doubles as a regression test
    config = tmp_path / "table2.toml"
    config.write_text(
        'example = "ex2"\nalpha = 0.6\nN = 2000\nscheme = "standard"\nmode = "tcte"\n'
        "[check]\nerr_max = 3.8628e-7\nerr_T = 3.1934e-9\nrtol = 0.02\n"
    )
    out = tmp_path / "out"
    assert cli.main(["solve", "--config", str(config), "--out", str(out)]) == 0
    summary = read_csv(out / "summary.csv")[0]
    assert float(summary["err_max"]) == pytest.approx(3.8628e-7, rel=0.01)


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "fracstep", "coeffs", "--set", "N=5", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "coeffs.csv").exists()


# }}}
