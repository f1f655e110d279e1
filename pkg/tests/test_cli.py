"""Command-line interface: artifacts, determinism, exit codes."""

import os

import pytest
from click.testing import CliRunner

from msfedl.cli import (EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO,
                        EXIT_NO_CONVERGENCE, main)


@pytest.fixture()
def runner():
    return CliRunner()


def run_ok(runner, args):
    res = runner.invoke(main, args, catch_exceptions=False)
    assert res.exit_code == 0, res.output
    return res


class TestGenerate:
    def test_writes_scenario(self, runner, tmp_path):
        run_ok(runner, ["generate", "--seed", "7", "--ues", "5",
                        "--out", str(tmp_path)])
        path = tmp_path / "scenario_seed7.yaml"
        assert path.exists()
        first = path.read_bytes()
        run_ok(runner, ["generate", "--seed", "7", "--ues", "5",
                        "--out", str(tmp_path)])
        assert path.read_bytes() == first

    def test_infeasible_config_exit_code(self, runner, tmp_path):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("cpu_min: 5.0e8\n"
                       "ue_distribution:\n"
                       "  cpu_total_range: [1.0e9, 1.1e9]\n")
        res = runner.invoke(main, ["generate", "--seed", "1", "--ues", "4",
                                   "--config", str(cfg),
                                   "--out", str(tmp_path)])
        assert res.exit_code == EXIT_INFEASIBLE


class TestSolve:
    def test_centralized_artifacts(self, runner, tmp_path):
        run_ok(runner, ["solve", "--seed", "5", "--ues", "6",
                        "--out", str(tmp_path)])
        cost = tmp_path / "cost_centralized_seed5.csv"
        outcome = tmp_path / "outcome_centralized_seed5.txt"
        assert cost.exists() and outcome.exists()
        text = cost.read_text()
        assert text.startswith("# msfedl-csv v1\n# seed: 5\n# params: ")
        assert outcome.read_text().startswith("msfedl-outcome v1\n")

    def test_rerun_byte_identical(self, runner, tmp_path):
        args = ["solve", "--seed", "5", "--ues", "6", "--out", str(tmp_path)]
        run_ok(runner, args)
        first = (tmp_path / "cost_centralized_seed5.csv").read_bytes()
        run_ok(runner, args)
        assert (tmp_path / "cost_centralized_seed5.csv").read_bytes() == first

    def test_decentralized_writes_trace(self, runner, tmp_path):
        run_ok(runner, ["solve", "--seed", "2", "--ues", "5", "--mode",
                        "jacobi-early-stop", "--out", str(tmp_path)])
        trace = tmp_path / "trace_jacobi-early-stop_seed2.csv"
        assert trace.exists()
        body = trace.read_text().splitlines()
        assert body[3] == ("iter,objective,r1_norm,r2_norm_max,"
                           "f_delta_frobenius,z_delta,mode")

    def test_solve_from_file(self, runner, tmp_path):
        run_ok(runner, ["generate", "--seed", "9", "--ues", "5",
                        "--out", str(tmp_path)])
        run_ok(runner, ["solve", "--scenario-file",
                        str(tmp_path / "scenario_seed9.yaml"),
                        "--out", str(tmp_path)])
        assert (tmp_path / "cost_centralized_seed9.csv").exists()

    def test_both_sources_is_config_error(self, runner, tmp_path):
        res = runner.invoke(main, ["solve", "--seed", "1", "--scenario-file",
                                   "x.yaml", "--out", str(tmp_path)])
        assert res.exit_code == EXIT_CONFIG

    def test_neither_source_is_config_error(self, runner, tmp_path):
        res = runner.invoke(main, ["solve", "--out", str(tmp_path)])
        assert res.exit_code == EXIT_CONFIG

    def test_missing_file_is_io_error(self, runner, tmp_path):
        res = runner.invoke(main, ["solve", "--scenario-file",
                                   str(tmp_path / "nope.yaml"),
                                   "--out", str(tmp_path)])
        assert res.exit_code == EXIT_IO

    def test_iteration_cap_is_non_convergence(self, runner, tmp_path):
        res = runner.invoke(main, ["solve", "--seed", "2", "--ues", "5",
                                   "--mode", "jacobi", "--max-outer", "2",
                                   "--out", str(tmp_path)])
        assert res.exit_code == EXIT_NO_CONVERGENCE


class TestSweepKappa:
    def test_artifacts(self, runner, tmp_path):
        run_ok(runner, ["sweep-kappa", "--seed", "4", "--ues", "5",
                        "--kappa3", "0.1", "--kappa3", "1.0",
                        "--out", str(tmp_path)])
        csv = tmp_path / "kappa_sweep_seed4.csv"
        svg = tmp_path / "kappa_sweep_seed4.svg"
        assert csv.exists() and svg.exists()
        # 3 comment lines + header + one row per (kappa, service)
        assert len(csv.read_text().strip().splitlines()) == 3 + 1 + 2 * 3


class TestConvergenceStudy:
    def test_deterministic_under_concurrency(self, runner, tmp_path):
        base = ["convergence-study", "--seed", "1", "--ues", "4",
                "--reps", "2", "--out", str(tmp_path)]
        run_ok(runner, base + ["--workers", "1"])
        first = (tmp_path / "convergence_study_seed1.csv").read_bytes()
        run_ok(runner, base + ["--workers", "3"])
        assert (tmp_path / "convergence_study_seed1.csv").read_bytes() == first


class TestFedlDemo:
    def test_artifacts(self, runner, tmp_path):
        run_ok(runner, ["fedl-demo", "--seed", "3", "--dim", "6", "--ues",
                        "3", "--samples", "20", "--rounds", "25",
                        "--out", str(tmp_path)])
        files = os.listdir(tmp_path)
        assert any(f.startswith("fedl_demo") and f.endswith(".csv")
                   for f in files)
        assert any(f.endswith(".svg") for f in files)
