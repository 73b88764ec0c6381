"""Command-line behavior: exit codes, artifacts, determinism, precedence."""

import json
import subprocess
import sys

import numpy as np
import pytest

from hjbpass import cli
from hjbpass.experiments import CheckResult, ExperimentResult
from hjbpass.io import read_csv


def run_cli(args):
    return cli.main(list(args))


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        out = tmp_path / "counter"
        proc = subprocess.run(
            [sys.executable, "-m", "hjbpass.cli", "counterexample", "--check",
             "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert "eigenvalues of the test matrix" in proc.stdout
        assert proc.stdout.count("CHECK") == 3
        assert "FAIL" not in proc.stdout
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "counterexample"
        assert all(c["passed"] for c in manifest["checks"])


class TestDeterminism:
    def test_identical_solves_are_byte_identical(self, tmp_path, capsys):
        outs = [tmp_path / "run_a", tmp_path / "run_b"]
        for out in outs:
            rc = run_cli(
                ["solve-hjb", "--preset", "pendulum-paper", "--out", str(out)]
            )
            assert rc == 0
        capsys.readouterr()
        for name in (
            "value_function.csv",
            "iterations.csv",
            "hjb_residual.csv",
            "value_surface.csv",
        ):
            a = (outs[0] / name).read_bytes()
            b = (outs[1] / name).read_bytes()
            assert a == b, f"{name} differs between identical runs"


class TestPrecedence:
    def test_flag_beats_set_beats_config_file(self, tmp_path, capsys):
        cfg_file = tmp_path / "solve.cfg"
        cfg_file.write_text("preset = pendulum-paper\ndegree = 6\n")
        out = tmp_path / "flag"
        rc = run_cli(
            ["solve-hjb", "--config", str(cfg_file), "--set", "degree=7",
             "--degree", "8", "--out", str(out)]
        )
        assert rc == 0
        capsys.readouterr()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["degree"] == 8

        out2 = tmp_path / "set"
        rc = run_cli(
            ["solve-hjb", "--config", str(cfg_file), "--set", "degree=7",
             "--out", str(out2)]
        )
        assert rc == 0
        capsys.readouterr()
        manifest = json.loads((out2 / "manifest.json").read_text())
        assert manifest["config"]["degree"] == 7


class TestConfigErrors:
    @pytest.mark.parametrize(
        "args",
        [
            ["solve-hjb", "--preset", "pendulum-paper", "--degree", "0"],
            ["solve-hjb", "--preset", "pendulum-paper", "--set", "bogus=1"],
            ["solve-hjb", "--preset", "pendulum-paper", "--set", "nosign"],
            ["simulate", "--preset", "pendulum-paper", "--set", "num_nodes=1"],
            ["convergence", "--preset", "vdp-paper"],
            ["solve-hjb", "--preset", "no-such-preset"],
        ],
    )
    def test_exit_code_two_with_message(self, args, capsys, tmp_path):
        rc = run_cli(args + ["--out", str(tmp_path / "scratch")])
        captured = capsys.readouterr()
        assert rc == 2
        assert "config error:" in captured.err or "--set expects" in captured.err


class TestNumericalFailure:
    def test_error_record_written(self, tmp_path, capsys):
        out = tmp_path / "fail"
        rc = run_cli(
            ["solve-hjb", "--preset", "pendulum-paper", "--set", "max_iters=2",
             "--out", str(out)]
        )
        captured = capsys.readouterr()
        assert rc == 3
        assert "numerical failure" in captured.err
        record = json.loads((out / "solve-hjb-error.json").read_text())
        assert record["command"] == "solve-hjb"
        assert record["error"]["type"] == "NonConvergenceError"
        assert "2 iterations" in record["error"]["message"]
        assert record["error"]["step_index"] is None
        assert record["error"]["partial_trajectory"] is None


class TestCheckFailure:
    def test_exit_code_four(self, tmp_path, monkeypatch, capsys):
        def fake_runner(cfg):
            return ExperimentResult(
                command="counterexample",
                out_dir=str(tmp_path),
                artifacts=[],
                checks=[CheckResult("always-fails", False, "forced")],
                manifest={},
                summary_lines=["fake run"],
            )

        monkeypatch.setitem(cli._COMMANDS, "counterexample", (fake_runner, "fake"))
        rc = run_cli(["counterexample", "--check"])
        captured = capsys.readouterr()
        assert rc == 4
        assert "CHECK always-fails: FAIL" in captured.out

    def test_checks_not_evaluated_without_flag(self, tmp_path, monkeypatch, capsys):
        def fake_runner(cfg):
            return ExperimentResult(
                command="counterexample",
                out_dir=str(tmp_path),
                artifacts=[],
                checks=[CheckResult("always-fails", False, "forced")],
                manifest={},
                summary_lines=[],
            )

        monkeypatch.setitem(cli._COMMANDS, "counterexample", (fake_runner, "fake"))
        assert run_cli(["counterexample"]) == 0
        assert "CHECK" not in capsys.readouterr().out


class TestSimulate:
    def test_rest_state_stays_at_rest(self, tmp_path, capsys):
        out = tmp_path / "rest"
        rc = run_cli(
            ["simulate", "--preset", "pendulum-paper", "--out", str(out),
             "--set", "z0=0,0", "--set", "horizon=1.0", "--set", "num_nodes=51"]
        )
        assert rc == 0
        capsys.readouterr()
        for kind in ("uncontrolled", "passive", "ekf"):
            header, data = read_csv(str(out / f"trajectory_{kind}.csv"))
            z_cols = [i for i, name in enumerate(header) if name.startswith("z_")]
            assert z_cols
            assert np.max(np.abs(data[:, z_cols])) <= 1e-12, kind

    def test_state_decay_table_covers_all_runs(self, tmp_path, capsys):
        out = tmp_path / "decay"
        rc = run_cli(
            ["simulate", "--preset", "pendulum-paper", "--out", str(out),
             "--set", "horizon=1.0", "--set", "num_nodes=51",
             "--set", "controller=passive"]
        )
        assert rc == 0
        capsys.readouterr()
        header, data = read_csv(str(out / "state_decay.csv"))
        assert header == ["t", "uncontrolled", "passive"]
        assert data.shape == (51, 3)
        assert np.all(data[:, 1:] >= 0.0)


class TestVerifyPassivity:
    def test_short_run_passes_checks(self, tmp_path, capsys):
        out = tmp_path / "verify"
        rc = run_cli(
            ["verify-passivity", "--preset", "pendulum-paper", "--out", str(out),
             "--set", "horizon=1.0", "--set", "num_nodes=51", "--check"]
        )
        captured = capsys.readouterr()
        assert rc == 0
        assert "CHECK pendulum-paper-power-residual-small: PASS" in captured.out
        assert "CHECK pendulum-paper-storage-nonincreasing: PASS" in captured.out
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "verify-passivity"
        run = manifest["runs"]["pendulum-paper"]
        assert run["power_residual_max"] < 1e-12
        header, _ = read_csv(str(out / "controller_run_pendulum-paper.csv"))
        assert header[:3] == ["t", "z_1", "z_2"]
