"""Config schema, CLI wiring, exit codes, output reproducibility."""

import json
import os

import pytest

from lorentzlab.cli import main
from lorentzlab.config import (
    ConfigError,
    build_config,
    parse_config_file,
    parse_decade_ladder,
    parse_float_list,
    parse_k_ladder,
)
from lorentzlab.experiments import run_experiment, write_outputs


class TestConfigParsing:
    def test_key_value_lines(self):
        raw = parse_config_file("a = 1\n# comment\n\nb= two # trailing\n")
        assert raw == {"a": "1", "b": "two"}

    def test_malformed_line(self):
        with pytest.raises(ConfigError):
            parse_config_file("just words\n")

    def test_defaults_and_overrides(self):
        cfg = build_config("scatter-table", "alpha = 0.4\n",
                           {"samples": "11"})
        assert cfg["alpha"] == 0.4
        assert cfg["samples"] == 11
        assert cfg["epsilon"] == 2.0**-6  # default
        assert cfg["out_prefix"] == "scatter-table"

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            build_config("scatter-table", "bogus = 1\n")

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError):
            build_config("scatter-table", "samples = lots\n")

    def test_wrong_experiment_declared(self):
        with pytest.raises(ConfigError):
            build_config("scatter-table", "experiment = fick-slab\n")

    def test_validation_rules(self):
        with pytest.raises(ConfigError):
            build_config("scatter-table", "alpha = 0.9\n")
        with pytest.raises(ConfigError):
            build_config("kinetic-compare", "kmin = 9\nkmax = 6\n")
        with pytest.raises(ConfigError):
            build_config("thermalization", "initial = sideways\n")

    def test_ladders(self):
        assert parse_k_ladder(3, 5) == [2.0**-3, 2.0**-4, 2.0**-5]
        assert parse_decade_ladder("1e-4..1e-6") == [1e-4, 1e-5, 1e-6]
        assert parse_float_list("0.5, 1, 2") == [0.5, 1.0, 2.0]
        with pytest.raises(ConfigError):
            parse_decade_ladder("nope")


class TestCLI:
    def test_success_and_outputs(self, tmp_path):
        rc = main(["scatter-table", "--alpha", "0.25", "--epsilon", "0.01",
                   "--samples", "21", "--out-dir", str(tmp_path)])
        assert rc == 0
        csv = (tmp_path / "scatter-table.csv").read_text().splitlines()
        assert csv[0] == "rho,theta,branch"
        assert len(csv) == 22
        meta = json.loads((tmp_path / "scatter-table.json").read_text())
        assert meta["experiment"] == "scatter-table"
        assert meta["config_resolved"]["samples"] == 21
        assert "duration_s" in meta

    def test_config_file_roundtrip(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("experiment = scatter-table\nsamples = 7\n")
        rc = main(["scatter-table", "--config", str(cfgfile),
                   "--out-dir", str(tmp_path)])
        assert rc == 0
        meta = json.loads((tmp_path / "scatter-table.json").read_text())
        assert meta["config_resolved"]["samples"] == 7
        assert "samples = 7" in meta["config_file_text"]

    def test_config_error_exit_code(self, capsys):
        assert main(["scatter-table", "--set", "bogus=1"]) == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_config_file_exit_code(self):
        assert main(["scatter-table", "--config", "/nonexistent.cfg"]) == 2

    def test_numerical_guard_exit_code(self, tmp_path, capsys):
        # 2 eps^alpha >= speed^2 on the coarsest ladder point
        rc = main(["b-divergence", "--alpha", "0.5", "--eps", "1e-1..1e-1",
                   "--set", "speed=0.5", "--out-dir", str(tmp_path)])
        assert rc == 3
        assert "guard" in capsys.readouterr().err

    def test_set_overrides_config_file(self, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("samples = 7\n")
        rc = main(["scatter-table", "--config", str(cfgfile), "--set",
                   "samples=9", "--out-dir", str(tmp_path)])
        assert rc == 0
        meta = json.loads((tmp_path / "scatter-table.json").read_text())
        assert meta["config_resolved"]["samples"] == 9


class TestReproducibility:
    def test_identical_reruns_bitwise(self, tmp_path):
        cfg = build_config("kinetic-compare",
                           "kmin = 6\nkmax = 7\nsamples = 400\n"
                           "seed = 99\nout_prefix = kc\n")
        texts = []
        for run in ("a", "b"):
            out = tmp_path / run
            csv_path, _ = write_outputs(run_experiment(cfg), str(out))
            texts.append(open(csv_path, "rb").read())
        assert texts[0] == texts[1]

    def test_worker_counts_bitwise_identical(self, tmp_path):
        texts = []
        for w in (1, 3):
            cfg = build_config(
                "pathology-scan",
                f"kmin = 4\nkmax = 5\ntrajectories = 600\nworkers = {w}\n"
                "seed = 5\n",
            )
            out = tmp_path / f"w{w}"
            csv_path, _ = write_outputs(run_experiment(cfg), str(out))
            texts.append(open(csv_path, "rb").read())
        assert texts[0] == texts[1]


class TestRunnersSmoke:
    def test_b_divergence_summary(self):
        cfg = build_config("b-divergence", "eps_ladder = 1e-4..1e-8\n")
        rep = run_experiment(cfg)
        assert rep.summary["deviation_monotone_improving"] is True
        assert len(rep.rows) == 5
        # B_eps grows as eps shrinks
        bs = [r[1] for r in rep.rows]
        assert all(b2 > b1 for b1, b2 in zip(bs, bs[1:]))

    def test_diffusion_routes_in_summary(self):
        cfg = build_config("diffusion", "paths = 5000\n")
        rep = run_experiment(cfg)
        s = rep.summary
        assert s["D_analytic"] == pytest.approx(0.5)
        assert s["max_route_spread"] < 0.15
        # D_running column ends at the Monte Carlo value
        assert rep.rows[-1][3] == pytest.approx(s["D_mc_vacf"])

    def test_thermalization_uniform_initial_stays_uniform(self):
        cfg = build_config(
            "thermalization",
            "samples = 1200\ntimes = 0.25\ninitial = uniform\nk = 6\n",
        )
        rep = run_experiment(cfg)
        assert rep.summary["p_values"]["0.25"] > 0.01

    def test_scatter_table_rows(self):
        cfg = build_config("scatter-table", "samples = 5\n")
        rep = run_experiment(cfg)
        rhos = [r[0] for r in rep.rows]
        assert rhos == [-1.0, -0.5, 0.0, 0.5, 1.0]
        thetas = dict((r[0], r[1]) for r in rep.rows)
        assert thetas[0.5] == -thetas[-0.5]
