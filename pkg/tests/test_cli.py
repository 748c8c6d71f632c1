"""Config parsing, CSV/manifest output, and exit codes of the runner."""

import csv
import json
from textwrap import dedent

import numpy as np
import pytest

from dloccsim.cli import (
    COLUMNS,
    ConfigError,
    main,
    parse_config,
    parse_grid,
    parse_int_list,
)
from dloccsim.protocols import oracle_dynamic_dejmps, oracle_learned_s


def write_config(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(dedent(text))
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestGrids:
    def test_range_grid_inclusive_and_snapped(self):
        grid = parse_grid("0.1:0.9:0.1")
        assert grid == (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

    def test_comma_and_single(self):
        assert parse_grid("0.05,0.5,0.95") == (0.05, 0.5, 0.95)
        assert parse_grid("0.7") == (0.7,)

    def test_grid_errors_name_the_key(self):
        with pytest.raises(ConfigError, match="'gamma'"):
            parse_grid("0.1:0.9", "gamma")
        with pytest.raises(ConfigError):
            parse_grid("0.9:0.1:0.1")
        with pytest.raises(ConfigError):
            parse_grid("0.1:0.9:0")
        with pytest.raises(ConfigError):
            parse_grid("abc")

    def test_int_lists(self):
        assert parse_int_list("2:6:1") == (2, 3, 4, 5, 6)
        assert parse_int_list("4,7,10") == (4, 7, 10)
        with pytest.raises(ConfigError):
            parse_int_list("2.5")


class TestConfig:
    def test_defaults_without_file(self):
        cfg = parse_config(None, "distill-s")
        assert cfg["experiment"]["copies"] == (2, 3, 4, 5, 6)
        assert cfg["experiment"]["methods"] == ("oracle_learned", "oracle_ddejmps", "sim")
        assert cfg["train"]["max_iters"] == 200
        assert cfg["output"]["csv"] is None

    def test_full_file(self, tmp_path):
        path = write_config(
            tmp_path,
            """
            # sweep setup
            [experiment]
            gamma = 0.3,0.5
            copies = 2,3
            methods = sim

            [train]
            max_iters = 50
            seed = 4

            [output]
            csv = out.csv
            """,
        )
        cfg = parse_config(path, "distill-s")
        assert cfg["experiment"]["gamma"] == (0.3, 0.5)
        assert cfg["train"]["max_iters"] == 50
        assert cfg["train"]["seed"] == 4
        assert cfg["output"]["csv"] == "out.csv"

    def test_unknown_key_is_named(self, tmp_path):
        path = write_config(tmp_path, "[experiment]\ngama = 0.3\n")
        with pytest.raises(ConfigError, match="'gama'"):
            parse_config(path, "distill-s")

    def test_unknown_section(self, tmp_path):
        path = write_config(tmp_path, "[extras]\nx = 1\n")
        with pytest.raises(ConfigError, match="extras"):
            parse_config(path, "distill-s")

    def test_duplicate_key(self, tmp_path):
        path = write_config(tmp_path, "[experiment]\ngamma = 0.1\ngamma = 0.2\n")
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(path, "distill-s")

    def test_key_outside_section(self, tmp_path):
        path = write_config(tmp_path, "gamma = 0.1\n")
        with pytest.raises(ConfigError, match="section"):
            parse_config(path, "distill-s")

    def test_bad_method_name(self, tmp_path):
        path = write_config(tmp_path, "[experiment]\nmethods = sim,magic\n")
        with pytest.raises(ConfigError, match="magic"):
            parse_config(path, "distill-s")

    def test_bad_mode_choice(self, tmp_path):
        path = write_config(tmp_path, "[experiment]\nmode = static\n")
        with pytest.raises(ConfigError, match="mode"):
            parse_config(path, "distill-iso")

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="cannot read"):
            parse_config("/nonexistent/path.cfg", "oracle")

    def test_priors_must_be_a_pair(self, tmp_path):
        path = write_config(tmp_path, "[experiment]\npriors = 0.5,0.3,0.2\n")
        with pytest.raises(ConfigError, match="priors"):
            parse_config(path, "discriminate")


class TestRunner:
    def test_oracle_table(self, tmp_path):
        assert main(["oracle", "--out", str(tmp_path), "--jobs", "1"]) == 0
        rows = read_rows(tmp_path / "oracle.csv")
        assert rows[0] == list(COLUMNS)
        body = rows[1:]
        # 9 gammas x 6 copy counts x 2 oracles
        assert len(body) == 108
        first = body[0]
        assert first[:3] == ["oracle", "oracle_ddejmps", "gamma"]
        assert float(first[5]) == oracle_dynamic_dejmps(2, 0.1)
        learned = [r for r in body if r[1] == "oracle_learned" and r[3] == "0.5" and r[4] == "3"]
        assert float(learned[0][5]) == oracle_learned_s(3, 0.5)

    def test_output_is_deterministic_across_jobs(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["oracle", "--out", str(a), "--jobs", "1"]) == 0
        assert main(["oracle", "--out", str(b), "--jobs", "2"]) == 0
        assert (a / "oracle.csv").read_bytes() == (b / "oracle.csv").read_bytes()

    def test_verify_reports_worst_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "[experiment]\ngamma = 0.3,0.7\ncopies = 2,3\n")
        assert main(["verify", "--config", cfg, "--out", str(tmp_path), "--jobs", "1"]) == 0
        said = capsys.readouterr().out
        assert "max |oracle - simulation| = " in said
        worst = float(said.split("=")[1])
        assert worst < 1e-9

    def test_distill_s_sim_matches_oracle(self, tmp_path):
        cfg = write_config(
            tmp_path,
            """
            [experiment]
            gamma = 0.4
            copies = 2,3
            methods = oracle_learned,sim
            [output]
            csv = s.csv
            """,
        )
        assert main(["distill-s", "--config", cfg, "--out", str(tmp_path), "--jobs", "1"]) == 0
        body = read_rows(tmp_path / "s.csv")[1:]
        got = {(r[1], int(r[4])): float(r[5]) for r in body}
        for n in (2, 3):
            assert np.isclose(got[("sim", n)], got[("oracle_learned", n)], atol=1e-10)

    def test_distill_iso_copy_accounting(self, tmp_path):
        cfg = write_config(
            tmp_path,
            """
            [experiment]
            mode = iterative
            iterations = 1,2
            methods = oracle,input
            """,
        )
        assert main(["distill-iso", "--config", cfg, "--out", str(tmp_path), "--jobs", "1"]) == 0
        body = read_rows(tmp_path / "distill-iso.csv")[1:]
        by_method = {(r[1], int(r[4])) for r in body}
        assert ("oracle_iterative", 4) in by_method
        assert ("oracle_iterative", 16) in by_method
        assert ("input", 1) in by_method

    def test_discriminate_helstrom_only(self, tmp_path):
        cfg = write_config(
            tmp_path,
            """
            [experiment]
            channel = dephasing
            p = 0.2
            copies = 1,2
            methods = helstrom
            """,
        )
        assert main(["discriminate", "--config", cfg, "--out", str(tmp_path), "--jobs", "1"]) == 0
        body = read_rows(tmp_path / "discriminate.csv")[1:]
        values = {int(r[4]): float(r[5]) for r in body}
        assert 0.5 < values[1] <= values[2] <= 1.0

    def test_manifest_contents(self, tmp_path):
        assert main(["oracle", "--out", str(tmp_path), "--jobs", "1", "--seed", "9"]) == 0
        manifest = json.loads((tmp_path / "oracle_manifest.json").read_text())
        assert manifest["status"] == "ok"
        assert manifest["rows"] == 108
        assert manifest["seed"] == 9
        assert manifest["config"]["experiment"]["copies"] == [2, 3, 4, 5, 6, 7]
        assert set(manifest["versions"]) == {"dloccsim", "numpy", "python"}

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "[experiment]\nwibble = 1\n")
        assert main(["oracle", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "wibble" in capsys.readouterr().err

    def test_bad_jobs_exit_code(self, tmp_path):
        assert main(["oracle", "--out", str(tmp_path), "--jobs", "0"]) == 2

    def test_capacity_error_exit_code(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("DLOCC_MAX_DIM", "8")
        cfg = write_config(tmp_path, "[experiment]\ngamma = 0.5\ncopies = 2\nmethods = sim\n")
        code = main(["distill-s", "--config", cfg, "--out", str(tmp_path), "--jobs", "1"])
        assert code == 3
        assert "capacity" in capsys.readouterr().err
        manifest = json.loads((tmp_path / "distill-s_manifest.json").read_text())
        assert manifest["status"] == "error"
        assert "error" in manifest
