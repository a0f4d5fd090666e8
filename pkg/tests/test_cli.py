import csv
import os
import subprocess
import sys

import pytest

from toyobserver.cli import RunConfig, main, parse_config, parse_config_text, run
from toyobserver.errors import ConfigError

SMALL_ORACLE = ["--M", "2", "--trials", "2"]


def files(d):
    return {n: open(os.path.join(d, n), "rb").read() for n in sorted(os.listdir(d))}


class TestConfig:
    def test_empty_gives_defaults(self):
        cfg = parse_config("")
        assert cfg.mode == "exact" and (cfg.B, cfg.W, cfg.T, cfg.seed) == (2, 32, 10, 0)
        assert cfg.Ns == (1000, 10000, 100000) and cfg.out == "out/"

    def test_invalid_value_names_key(self):
        with pytest.raises(ConfigError) as ei:
            parse_config("B=1")
        assert ei.value.key == "B"

    def test_flag_beats_file(self):
        assert parse_config("seed=5", {"seed": "7"}).seed == 7
        assert parse_config("seed=5").seed == 5

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as ei:
            parse_config("colour=blue")
        assert ei.value.key == "colour"

    def test_comments_and_lists(self):
        d = parse_config_text("# header\nNs = 10, 1e3  # trailing\n\nN=1e4\n")
        assert d == {"Ns": (10, 1000), "N": 10000}

    def test_unparsable(self):
        with pytest.raises(ConfigError) as ei:
            parse_config("W=lots")
        assert ei.value.key == "W"

    def test_mode_from_subcommand(self):
        assert parse_config("mode=mc", mode="oracle").mode == "oracle"


class TestMain:
    def test_exact_rows(self, tmp_path, capsys):
        out = f"{tmp_path}/"
        assert main(["simulate", "--B", "2", "--T", "8", "--out", out]) == 0
        rows = list(csv.reader(open(out + "cascades.csv")))
        assert rows[0] == ["point_id", "age_a", "generations", "neurons_X", "capped"]
        assert len(rows) == 1 + 511
        summ = list(csv.DictReader(open(out + "summary.csv")))[0]
        assert int(summ["N"]) == 511 and int(summ["X1"]) >= int(summ["X2"])
        assert "N=511" in capsys.readouterr().out

    def test_bad_config_exits_1(self, tmp_path, capsys):
        assert main(["simulate", "--B", "1", "--out", f"{tmp_path}/"]) == 1
        assert "B" in capsys.readouterr().err
        assert os.listdir(tmp_path) == []

    def test_bad_flag_exits_1(self):
        with pytest.raises(SystemExit) as ei:
            main(["simulate", "--bogus", "3"])
        assert ei.value.code == 1

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(f"mode = mc\nN = 5000\nT = 12\nseed = 5\nout = {tmp_path}/o/\n")
        assert main(["run", "--config", str(cfg), "--seed", "7"]) == 0
        summ = list(csv.DictReader(open(tmp_path / "o" / "summary.csv")))[0]
        assert summ["seed"] == "7" and summ["N"] == "5000"

    def test_missing_config_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope")]) == 1

    def test_oracle_over_bound_exits_1(self, tmp_path):
        assert main(["oracle", "--orbital_count", "4", "--out", f"{tmp_path}/"]) == 1
        assert main(["oracle", "--max_dim", "1000", "--out", f"{tmp_path}/"]) == 1

    def test_oracle_small(self, tmp_path):
        out = f"{tmp_path}/"
        assert main(["oracle", *SMALL_ORACLE, "--out", out]) == 0
        rows = list(csv.DictReader(open(out + "oracle.csv")))
        assert {r["check"] for r in rows} == {"branching", "unitarity", "projectors", "backends", "symbolic"}
        assert all(r["passed"] == "1" for r in rows)

    def test_rebase(self, tmp_path):
        out = f"{tmp_path}/"
        assert main(["rebase", "--reps", "3", "--length", "4", "--out", out]) == 0
        rows = list(csv.DictReader(open(out + "rebase.csv")))
        assert len(rows) == 12 and all(r["passed"] == "1" for r in rows)

    def test_stats(self, tmp_path):
        out = f"{tmp_path}/"
        assert main(["stats", "--Ns", "100,1000", "--reps", "5", "--out", out]) == 0
        assert sorted(os.listdir(tmp_path)) == ["ccdf.csv", "gapscan.csv", "gapstats.csv", "summary.csv"]
        assert len(list(csv.reader(open(out + "gapscan.csv")))) == 1 + 10

    def test_module_entry_point(self, tmp_path):
        r = subprocess.run([sys.executable, "-m", "toyobserver", "sample", "--N", "1000",
                            "--out", f"{tmp_path}/"], capture_output=True, text=True)
        assert r.returncode == 0, r.stderr


class TestDeterminism:
    @pytest.mark.parametrize("argv", [
        ["simulate", "--T", "9", "--seed", "3"],
        ["sample", "--N", "20000", "--T", "16", "--seed", "3"],
        ["stats", "--Ns", "100,1000", "--reps", "6", "--source", "cascade"],
        ["rebase", "--reps", "2"],
    ])
    def test_rerun_is_byte_identical(self, tmp_path, argv):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main([*argv, "--out", f"{a}/"]) == 0
        assert main([*argv, "--out", f"{b}/"]) == 0
        assert files(a) == files(b)

    def test_workers_do_not_change_output(self, tmp_path):
        argv = ["stats", "--Ns", "200,2000", "--reps", "6", "--source", "cascade", "--T", "14"]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main([*argv, "--workers", "1", "--out", f"{a}/"]) == 0
        assert main([*argv, "--workers", "2", "--out", f"{b}/"]) == 0
        assert files(a) == files(b)

    def test_lf_line_endings(self, tmp_path):
        main(["simulate", "--T", "4", "--out", f"{tmp_path}/"])
        assert b"\r" not in (tmp_path / "cascades.csv").read_bytes()


class TestAtomicWrites:
    def test_no_temp_files_left(self, tmp_path):
        main(["simulate", "--T", "4", "--out", f"{tmp_path}/"])
        assert not [n for n in os.listdir(tmp_path) if n.startswith(".tmp-")]

    def test_failed_run_leaves_old_output(self, tmp_path):
        out = f"{tmp_path}/"
        main(["simulate", "--T", "4", "--out", out])
        before = files(tmp_path)
        code, _, paths = run(RunConfig(mode="exact", T=8, branch_cap=10, out=out).validate())
        assert code == 1 and paths == []
        assert files(tmp_path) == before
