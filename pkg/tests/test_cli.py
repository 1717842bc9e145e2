"""Tests for the command-line interface: parsing, reports, exit codes."""

from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from itrust.cli import (
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    InsufficientDataError,
    _config_hash,
    _parse_seeds,
    fit_linear_decay,
    fit_rate,
    main,
    read_config_file,
)


# ---------------------------------------------------------------------------
# Helpers


def test_parse_seeds():
    assert _parse_seeds("0-3") == [0, 1, 2, 3]
    assert _parse_seeds("1,5,9") == [1, 5, 9]
    assert _parse_seeds("4") == [4]
    with pytest.raises(ValueError):
        _parse_seeds("")


def test_fit_rate_recovers_power_law():
    ks = np.array([100, 1000, 10000, 100000], dtype=float)
    gaps = 3.0 * ks**-0.5
    fit = fit_rate(ks, gaps)
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.n_points == 4


def test_fit_rate_drops_floor_values_and_complains_when_starved():
    ks = np.array([10, 100, 1000, 10000])
    gaps = np.array([1e-1, 1e-2, 0.0, 1e-16])  # two unusable points
    with pytest.raises(InsufficientDataError):
        fit_rate(ks, gaps)


def test_fit_linear_decay_recovers_geometric_rate():
    k = np.arange(1, 40, dtype=float)
    gaps = 0.7 * 0.9**k
    fit = fit_linear_decay(k, gaps)
    assert fit.slope == pytest.approx(np.log(0.9), rel=1e-10)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_read_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# campaign defaults\n"
        "problem = quad5\n"
        "use-scaling = true\n"
        "\n"
        "T = 7\n"
    )
    values = read_config_file(str(path))
    assert values == {"problem": "quad5", "use_scaling": "true", "T": "7"}


def test_config_hash_ignores_output_options():
    base = {"problem": "quad5", "seed": 3, "out": "a", "format": "csv", "jobs": 1}
    moved = {"problem": "quad5", "seed": 3, "out": "b", "format": "json", "jobs": 4}
    assert _config_hash(base) == _config_hash(moved)
    assert _config_hash({**base, "seed": 4}) != _config_hash(base)
    assert len(_config_hash(base)) == 12


# ---------------------------------------------------------------------------
# solve


def run_solve(out, *extra):
    argv = [
        "solve",
        "--problem",
        "quad2",
        "--solver",
        "ecim",
        "--K",
        "400",
        "--T",
        "30",
        "--mu",
        "0.01",
        "--eta",
        "0.05",
        "--out",
        str(out),
    ]
    argv.extend(extra)
    return main(argv)


def test_solve_writes_trace_and_summary(tmp_path, capsys):
    assert run_solve(tmp_path) == EXIT_OK
    trace = tmp_path / "solve-quad2-ecim-seed0.trace.csv"
    summary = tmp_path / "solve-quad2-ecim-seed0.summary.json"
    assert trace.exists() and summary.exists()
    payload = json.loads(summary.read_text())
    assert payload["problem"] == "quad2"
    assert payload["converged"] is True
    assert payload["grad_norm"] <= 1e-8
    assert len(payload["theta"]) == 2
    assert "config_hash" in payload
    out = capsys.readouterr().out
    assert "quad2" in out and "converged" in out


def test_solve_trace_is_byte_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert run_solve(a, "--sigma2", "0.01") == EXIT_OK
    assert run_solve(b, "--sigma2", "0.01") == EXIT_OK
    ta = (a / "solve-quad2-ecim-seed0.trace.csv").read_bytes()
    tb = (b / "solve-quad2-ecim-seed0.trace.csv").read_bytes()
    assert ta == tb


def test_solve_unknown_problem_is_usage_error(tmp_path, capsys):
    rc = main(["solve", "--problem", "quad99", "--out", str(tmp_path)])
    assert rc == EXIT_USAGE
    err = capsys.readouterr().err
    assert "unknown problem" in err and "quad5" in err


def test_solve_exact_ball_backend(tmp_path):
    rc = main(
        [
            "solve",
            "--problem",
            "quad5",
            "--solver",
            "exact-ball",
            "--T",
            "40",
            "--mu",
            "0.01",
            "--eta",
            "0.05",
            "--out",
            str(tmp_path),
        ]
    )
    assert rc == EXIT_OK
    payload = json.loads(
        (tmp_path / "solve-quad5-exact-ball-seed0.summary.json").read_text()
    )
    assert payload["converged"] is True


def test_solve_divergent_machine_is_numerical_error(tmp_path, capsys):
    # A huge fixed step on an expanding radius blows up every subproblem and
    # the radius floor keeps the loop from recovering within the budget.
    rc = main(
        [
            "solve",
            "--problem",
            "quad2",
            "--solver",
            "ecim",
            "--K",
            "50",
            "--beta0",
            "1e9",
            "--delta0",
            "1e9",
            "--delta-max",
            "1e9",
            "--T",
            "3",
            "--gtol",
            "1e-300",
            "--out",
            str(tmp_path),
        ]
    )
    # All iterations fail; the run itself still completes with a warning, so
    # the command reports failure through the summary rather than a crash.
    assert rc in (EXIT_OK, EXIT_NUMERICAL)
    payload = json.loads(
        (tmp_path / "solve-quad2-ecim-seed0.summary.json").read_text()
    )
    assert payload["converged"] is False


def test_config_file_fills_defaults_and_flags_win(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("problem = quad5\nT = 2\ngtol = 1e-300\n")
    out = tmp_path / "reports"
    rc = main(["solve", "--config", str(cfg), "--problem", "quad2", "--out", str(out)])
    assert rc == EXIT_OK
    # Explicit --problem wins; T and gtol come from the file.
    summary = out / "solve-quad2-ecim-seed0.summary.json"
    payload = json.loads(summary.read_text())
    assert payload["problem"] == "quad2"
    assert payload["iterations"] <= 2
    assert payload["converged"] is False


def test_config_file_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("jitter = 3\n")
    rc = main(["solve", "--config", str(cfg), "--problem", "quad2", "--out", str(tmp_path)])
    assert rc == EXIT_USAGE
    assert "config error" in capsys.readouterr().err


def test_missing_subcommand_exits_with_usage():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == EXIT_USAGE


# ---------------------------------------------------------------------------
# campaigns


def test_verify_bounds_small_run(tmp_path, capsys):
    rc = main(
        [
            "verify-bounds",
            "--n",
            "2",
            "--seeds",
            "0-1",
            "--K",
            "2000",
            "--out",
            str(tmp_path),
        ]
    )
    assert rc == EXIT_OK
    report = tmp_path / "verify-bounds-n2.csv"
    assert report.exists()
    header = report.read_text().splitlines()[0]
    assert header.startswith("check,instance,seed")
    out = capsys.readouterr().out
    assert "0 failed" in out


def test_verify_bounds_rejects_large_dimension(tmp_path, capsys):
    rc = main(["verify-bounds", "--n", "9", "--out", str(tmp_path)])
    assert rc == EXIT_USAGE


def test_verify_bounds_json_report(tmp_path):
    rc = main(
        [
            "verify-bounds",
            "--n",
            "2",
            "--seeds",
            "0",
            "--K",
            "1000",
            "--format",
            "json",
            "--out",
            str(tmp_path),
        ]
    )
    assert rc == EXIT_OK
    payload = json.loads((tmp_path / "verify-bounds-n2.json").read_text())
    assert payload["command"].startswith("verify-bounds")
    assert payload["config_hash"]
    assert payload["summary"]["failed"] == 0
    assert all(row["passed"] for row in payload["rows"])


def test_rate_fit_fixed_schedule(tmp_path, capsys):
    rc = main(
        [
            "rate-fit",
            "--schedule",
            "fixed",
            "--seeds",
            "0-1",
            "--ks",
            "1500",
            "--out",
            str(tmp_path),
        ]
    )
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "slope" in out


def test_rate_fit_starved_of_data_is_usage_error(tmp_path, capsys):
    rc = main(
        [
            "rate-fit",
            "--schedule",
            "fixed-horizon",
            "--seeds",
            "0",
            "--ks",
            "40,80,160",
            "--out",
            str(tmp_path),
        ]
    )
    assert rc == EXIT_USAGE
    assert "insufficient data" in capsys.readouterr().err


def test_compare_oracles_small_run(tmp_path, capsys):
    rc = main(
        [
            "compare-oracles",
            "--count",
            "4",
            "--K",
            "4000",
            "--out",
            str(tmp_path),
        ]
    )
    assert rc == EXIT_OK
    report = tmp_path / "compare-oracles.csv"
    assert report.exists()
    rows = report.read_text().strip().splitlines()
    assert len(rows) == 5  # header + 4 instances
    assert "0 failed" in capsys.readouterr().out


def test_list_problems(capsys):
    assert main(["list-problems"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in ("quad2", "quad5", "rosenbrock2", "logistic", "illscaled"):
        assert name in out


def test_console_script_entry_point(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "itrust.cli", "list-problems"],
        capture_output=True,
        text=True,
    )
    assert result.returncode == EXIT_OK
    assert "quad20" in result.stdout


def test_report_rows_are_deterministic(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        rc = main(
            [
                "compare-oracles",
                "--count",
                "3",
                "--K",
                "2000",
                "--out",
                str(out),
            ]
        )
        assert rc == EXIT_OK
    ra = (a / "compare-oracles.csv").read_bytes()
    rb = (b / "compare-oracles.csv").read_bytes()
    assert ra == rb
