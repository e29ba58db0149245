"""Command-line behaviour: outputs, config merging and exit codes."""
from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from roughlab.cli import main, parse_grid_sizes, read_config
from roughlab.errors import ConfigInvalid


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestParsing:
    @pytest.mark.parametrize("text,expected", [
        ("16384", [16384]), ("2^14", [16384]), ("2^10,2^11, 4096", [1024, 2048, 4096]),
    ])
    def test_grid_sizes(self, text, expected):
        assert parse_grid_sizes(text) == expected

    @pytest.mark.parametrize("bad", ["", "abc", "2^x"])
    def test_bad_grid_sizes(self, bad):
        with pytest.raises(ConfigInvalid):
            parse_grid_sizes(bad)

    def test_config_file(self, tmp_path):
        p = tmp_path / "run.cfg"
        p.write_text("# comment\nnu = 1/4\npaths=200  # trailing\nparam.trials = 5\nq-max = 6\n")
        assert read_config(p) == {"nu": "1/4", "paths": "200", "params": {"trials": 5}, "q_max": "6"}

    @pytest.mark.parametrize("body", ["nu 0.3\n", "colour = red\n"])
    def test_bad_config(self, tmp_path, body):
        p = tmp_path / "bad.cfg"
        p.write_text(body)
        with pytest.raises(ConfigInvalid):
            read_config(p)


class TestConstants:
    def test_second_chaos(self, capsys):
        code, out, _ = run_cli(capsys, "constants", "--nu", "0.3", "--hermite", "H2")
        assert code == 0
        d = json.loads(out)
        assert d["rank"] == 2 and d["regime"] == "CLT" and d["ell"] == 2
        assert d["sigma2"] == pytest.approx(2.250391010722617, rel=1e-10)
        assert d["rho_power_sums"]["2"] == pytest.approx(1.125195505361313, rel=1e-10)
        assert d["rho_power_sums"]["1"] == 0.0

    def test_critical_and_csv(self, capsys):
        code, out, _ = run_cli(capsys, "constants", "--nu", "1/4", "--hermite", "H2", "--format", "csv")
        assert code == 0
        rows = dict(line.split(",", 1) for line in out.strip().splitlines()[1:])
        assert rows["regime"] == "Critical"
        assert float(rows["sigma2"]) == pytest.approx(2.3574874483134356, rel=1e-10)

    def test_power(self, capsys):
        code, out, _ = run_cli(capsys, "constants", "--nu", "0.4", "--power", "3")
        d = json.loads(out)
        assert code == 0 and d["rank"] == 2
        assert d["sigma2"] == pytest.approx(12.898711550613832, rel=1e-8)

    def test_divergent_sum_reported_as_null(self, capsys):
        code, out, _ = run_cli(capsys, "constants", "--nu", "0.8", "--hermite", "H2")
        d = json.loads(out)
        assert code == 0 and d["sigma2"] is None and d["rho_power_sums"]["2"] is None

    def test_writes_out(self, capsys, tmp_path):
        run_cli(capsys, "constants", "--out", str(tmp_path))
        assert json.loads((tmp_path / "constants.json").read_text())["function"] == "H2"


class TestSimulate:
    def test_csv_file(self, capsys, tmp_path):
        f = tmp_path / "paths.csv"
        code, out, _ = run_cli(capsys, "simulate", "--nu", "0.3", "--n", "64", "--paths", "3", "--out", str(f))
        assert code == 0
        vals = np.loadtxt(f, delimiter=",")
        assert vals.shape == (65, 3)
        assert json.loads(out)["seed"] == 42

    def test_seed_from_environment(self, capsys, monkeypatch):
        monkeypatch.setenv("ROUGHLAB_SEED", "9")
        _, out, _ = run_cli(capsys, "simulate", "--n", "8", "--paths", "2")
        assert json.loads(out)["seed"] == 9
        _, out, _ = run_cli(capsys, "simulate", "--n", "8", "--paths", "2", "--seed", "3")
        assert json.loads(out)["seed"] == 3

    def test_stdout_csv(self, capsys):
        _, out, _ = run_cli(capsys, "simulate", "--n", "4", "--paths", "2", "--format", "csv")
        assert len(out.strip().splitlines()) == 5


class TestExperiments:
    def test_selftest(self, capsys):
        code, out, err = run_cli(capsys, "selftest")
        assert code == 0
        assert json.loads(out)["passed"] is True
        assert "[PASS]" in err

    def test_experiment_csv_and_files(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "experiment", "smoke", "--format", "csv", "--out", str(tmp_path))
        assert code == 0
        assert out.splitlines()[0].startswith("experiment,n,M,seed")
        assert (tmp_path / "SMOKE.json").exists()

    def test_config_flags_win(self, capsys, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("seed = 5\nparam.trials = 10\n")
        _, out, _ = run_cli(capsys, "experiment", "smoke", "--config", str(cfg), "--seed", "6")
        d = json.loads(out)
        assert d["config"]["seed"] == 6 and d["config"]["params"]["trials"] == 10

    def test_sweep(self, capsys):
        code, out, _ = run_cli(capsys, "sweep", "smoke", "--nus", "0.3,0.4", "--format", "csv")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].startswith("nu,experiment")
        assert {line.split(",")[0] for line in lines[1:]} == {"0.3", "0.4"}


class TestExitCodes:
    @pytest.mark.parametrize("argv", [
        ["bogus"],
        ["constants", "--nu", "1.5"],
        ["constants", "--hermite", "X2"],
        ["experiment", "A99"],
        ["experiment", "smoke", "--paths", "10"],
        ["experiment", "smoke", "--n", "64,32"],
        ["experiment", "smoke", "--param", "novalue"],
        ["sweep", "smoke"],
        ["simulate", "--config", "/nonexistent/file"],
        [],
    ])
    def test_usage_errors(self, capsys, argv):
        code, _, err = run_cli(capsys, *argv)
        assert code == 2
        assert err

    def test_help(self, capsys):
        assert main(["--help"]) == 0

    def test_failed_verdict_exits_one(self, capsys, monkeypatch):
        from roughlab import cli

        class Failing:
            passed = False

            def summary_lines(self):
                return ["X [FAIL] forced"]

            def to_json(self):
                return "{}"

        monkeypatch.setattr(cli, "run", lambda cfg: Failing())
        code, _, err = run_cli(capsys, "experiment", "smoke")
        assert code == 1 and "FAIL" in err

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "roughlab", "constants", "--nu", "0.3"],
                             capture_output=True, text=True, check=False)
        assert res.returncode == 0
        assert json.loads(res.stdout)["regime"] == "CLT"
