import csv
import subprocess
import sys

import numpy as np
import pytest

from gibbsnet.harness.cli import main

FAST = ["--set", "burn_in=100", "--set", "n_kept=100", "--set", "thinning=1",
        "--set", "n_chains=2"]


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        assert main(["fly"]) == 1

    def test_unknown_key(self, tmp_path):
        assert main(["run", "--out", str(tmp_path), "--set", "colour=blue"]) == 1

    def test_malformed_set(self, tmp_path):
        assert main(["run", "--out", str(tmp_path), "--set", "n"]) == 1

    def test_cap(self, tmp_path, capsys):
        assert main(["run", "--out", str(tmp_path), "--set", "n=1000"]) == 1
        assert "allow-large" in capsys.readouterr().err

    def test_bad_threads(self, tmp_path):
        assert main(["run", "--out", str(tmp_path), "--threads", "0"]) == 1

    def test_verification_failure(self, tmp_path):
        code = main(["verify-bounds", "--out", str(tmp_path), "--a1-scale", "0.5",
                     "--set", "verify_configs=1", "--set", "verify_samples=20000",
                     "--set", "verify_candidates=1", "--set", "verify_n=20"])
        assert code == 2
        assert any(r["passed"] == "0" for r in rows(tmp_path / "verify.csv"))

    def test_numeric_error(self, tmp_path):
        code = main(["bound-eval", "--out", str(tmp_path), "--set", "beta=1e-320",
                     "--set", "n=100"])
        assert code == 3


class TestSubcommands:
    def test_verify_passes(self, tmp_path):
        code = main(["verify-bounds", "--out", str(tmp_path), "--set", "verify_configs=1",
                     "--set", "verify_samples=5000", "--set", "verify_candidates=1",
                     "--set", "verify_n=20"])
        assert code == 0
        assert (tmp_path / "config.txt").read_text().startswith("# config_hash = ")

    def test_run(self, tmp_path):
        assert main(["run", "--out", str(tmp_path), "--replications", "2", "--set", "n=20"] + FAST) == 0
        reps = rows(tmp_path / "replications.csv")
        assert len(reps) == 2
        summary = rows(tmp_path / "summary.csv")[0]
        assert "worstcase_rem" in summary
        assert rows(tmp_path / "bounds.csv")[0]["bound"] == "worstcase_rem"

    def test_run_from_config_file(self, tmp_path):
        cfg = tmp_path / "exp.ini"
        cfg.write_text("n = 15\nreplications = 1\nburn_in = 100\nn_kept = 100\nn_chains = 2\n")
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        assert rows(tmp_path / "o" / "summary.csv")[0]["n"] == "15"

    def test_rate_study(self, tmp_path):
        code = main(["rate-study", "--out", str(tmp_path), "--replications", "1",
                     "--set", "n_grid=10,20,30,40"] + FAST)
        assert code == 0
        assert len(rows(tmp_path / "rate.csv")) == 4
        assert len(rows(tmp_path / "rate_fit.csv")) == 1

    def test_activation_table(self, tmp_path):
        assert main(["activation-table", "--out", str(tmp_path), "--set", "table_points=21"]) == 0
        table = rows(tmp_path / "activation_table.csv")
        assert len(table) == 21
        u = np.array([float(r["u"]) for r in table])
        shift = [float(r["maiorov-gaussian"]) for r in table]
        assert u[0] == -5.0 and u[-1] == 15.0
        assert "kernel-triangle" in table[0] and min(shift) >= 0

    @pytest.mark.parametrize("act,second", [("logistic", "risk_bound_sigmoid"),
                                            ("relu", "barron_rate_bound")])
    def test_bound_eval(self, tmp_path, act, second, capsys):
        assert main(["bound-eval", "--out", str(tmp_path), "--set", f"activation={act}"]) == 0
        names = [r["bound"] for r in rows(tmp_path / "bounds.csv")]
        assert names[0] == "worstcase_rem" and second in names
        assert "worstcase_rem = " in capsys.readouterr().out


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "gibbsnet.harness.cli", "--help"],
                         capture_output=True, text=True, check=True).stdout
    for name in ("verify-bounds", "run", "rate-study", "activation-table", "bound-eval"):
        assert name in out
