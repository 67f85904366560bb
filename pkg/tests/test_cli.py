"""Tests for the CLI interface."""

import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from branchlab.cli import expand_paths, main


def run_cli(*args: str, env: dict[str, str] | None = None) -> subprocess.CompletedProcess:
    """Run the CLI with arguments and return the result."""
    cmd = [sys.executable, "-m", "branchlab", *args]
    environ = {k: v for k, v in os.environ.items() if k not in ("BRANCHLAB_OUT", "XDG_DATA_HOME")}
    environ.update(env or {})
    return subprocess.run(cmd, capture_output=True, text=True, env=environ)


class TestCLIBasic:
    """Basic CLI functionality tests."""

    def test_help(self):
        """--help lists the experiments."""
        result = run_cli("--help")
        assert result.returncode == 0
        for name in ("branch-demo", "born-derive", "large-n", "collapse", "finegrain", "bohm"):
            assert name in result.stdout
        assert "summary" in result.stdout

    def test_version(self):
        """--version shows version number."""
        result = run_cli("--version")
        assert result.returncode == 0
        assert "1.0.0" in result.stdout

    def test_no_args(self):
        """A subcommand is required."""
        result = run_cli()
        assert result.returncode == 2

    def test_unknown_experiment(self):
        assert run_cli("pilot-wave").returncode == 2

    def test_experiment_help(self):
        result = run_cli("collapse", "--help")
        assert result.returncode == 0
        assert "--set" in result.stdout
        assert "--serial" in result.stdout


class TestCLIRun:
    """Running experiments."""

    def test_finegrain_passes(self, tmp_path: Path):
        """A passing run exits 0 and writes its manifest."""
        out = tmp_path / "fg"
        result = run_cli("finegrain", "--out", str(out), "--no-colour")
        assert result.returncode == 0
        assert "PASS finegrain" in result.stdout
        assert "RUN SUMMARY" in result.stdout
        assert (out / "manifest.json").exists()
        assert (out / "fine_branches.csv").exists()

    def test_set_overrides(self, tmp_path: Path):
        out = tmp_path / "fg"
        result = run_cli(
            "finegrain", "--out", str(out), "--set", 'weights=["1/3", "2/3"]',
            "--set", "swaps=[[1, 3]]", "--seed", "5",
        )
        assert result.returncode == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["params"]["weights"] == ["1/3", "2/3"]
        assert manifest["config"]["master_seed"] == 5

    def test_config_file(self, tmp_path: Path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({
            "experiment": "finegrain",
            "output_format": "both",
            "params": {"weights": ["1/2", "1/2"], "swaps": [[1, 2]]},
        }))
        out = tmp_path / "fg"
        result = run_cli("finegrain", "--config", str(config), "--out", str(out))
        assert result.returncode == 0
        assert (out / "swaps.csv").exists()
        assert (out / "swaps.json").exists()

    def test_json_console(self, tmp_path: Path):
        """--console json produces valid JSON."""
        result = run_cli("finegrain", "--out", str(tmp_path / "fg"), "--console", "json")
        assert result.returncode == 0
        data = json.loads(result.stdout)
        assert data["summary"]["passed"] is True
        assert data["runs"][0]["experiment"] == "finegrain"

    def test_env_var_output(self, tmp_path: Path):
        """BRANCHLAB_OUT wins over --out."""
        env_out = tmp_path / "env"
        result = run_cli(
            "finegrain", "--out", str(tmp_path / "flag"),
            env={"BRANCHLAB_OUT": str(env_out)},
        )
        assert result.returncode == 0
        assert (env_out / "manifest.json").exists()
        assert not (tmp_path / "flag").exists()

    def test_large_n_small(self, tmp_path: Path):
        result = run_cli(
            "large-n", "--out", str(tmp_path / "ln"), "--no-colour",
            "--set", "N=1000", "--set", "runs=0", "--set", "washout_sizes=[100]",
        )
        assert result.returncode == 0
        assert "[WARNING] largen.quoted_ratio" in result.stdout

    def test_wrong_swap_verdict_fails(self, tmp_path: Path):
        """A swap whose verdict disagrees with the expectation fails the run."""
        out = tmp_path / "fg"
        result = run_cli(
            "finegrain", "--out", str(out), "--no-colour",
            "--set", 'swaps=[[3, 4, "admissible"]]',
        )
        assert result.returncode == 1
        manifest = json.loads((out / "manifest.json").read_text())
        swap = next(c for c in manifest["checks"] if c["name"] == "finegrain.swap.3-4")
        assert swap["passed"] is False


class TestCLIErrors:
    """Usage and config errors exit 2."""

    def test_bad_set_item(self, tmp_path: Path):
        result = run_cli("finegrain", "--out", str(tmp_path), "--set", "weights")
        assert result.returncode == 2
        assert "Config error: --set" in result.stderr

    def test_unknown_param(self, tmp_path: Path):
        result = run_cli("large-n", "--out", str(tmp_path), "--set", "M=5")
        assert result.returncode == 2
        assert "params.M: unknown key" in result.stderr

    def test_out_of_range(self, tmp_path: Path):
        result = run_cli("large-n", "--out", str(tmp_path), "--set", "p=2")
        assert result.returncode == 2
        assert "params.p" in result.stderr

    @pytest.mark.parametrize("item", ["speed=0", "width=0", "width=-1"])
    def test_degenerate_packets_rejected(self, tmp_path: Path, item: str):
        """Packets that cannot separate or have no width never start integrating."""
        result = run_cli("bohm", "--out", str(tmp_path), "--set", item)
        name = item.partition("=")[0]
        assert result.returncode == 2
        assert f"params.{name}: must be > 0.0" in result.stderr

    def test_bad_swap_verdict(self, tmp_path: Path):
        result = run_cli(
            "finegrain", "--out", str(tmp_path), "--set", 'swaps=[[1, 2, "maybe"]]'
        )
        assert result.returncode == 2
        assert "params.swaps[0]" in result.stderr

    def test_missing_config(self, tmp_path: Path):
        result = run_cli("finegrain", "--config", str(tmp_path / "absent.json"))
        assert result.returncode == 2
        assert "file not found" in result.stderr

    def test_bad_format(self):
        assert run_cli("finegrain", "--format", "xml").returncode == 2

    def test_rejected_weights(self, tmp_path: Path):
        """Weights that do not sum to one are a domain error."""
        result = run_cli("finegrain", "--out", str(tmp_path), "--set", 'weights=["1/2", "1/3"]')
        assert result.returncode == 2
        assert "Error:" in result.stderr


class TestCLISummary:
    """The summary subcommand."""

    def test_summary_of_runs(self, tmp_path: Path):
        for name in ("a", "b"):
            assert run_cli("finegrain", "--out", str(tmp_path / name)).returncode == 0
        result = run_cli("summary", str(tmp_path / "*" / "manifest.json"), "--no-colour")
        assert result.returncode == 0
        assert "finegrain.branch_count" in result.stdout
        assert result.stdout.strip().endswith("exit code: 0")

    def test_summary_json(self, tmp_path: Path):
        assert run_cli("finegrain", "--out", str(tmp_path / "a")).returncode == 0
        result = run_cli("summary", str(tmp_path / "a"), "--console", "json")
        data = json.loads(result.stdout)
        assert data["exit_code"] == 0
        assert data["rows"]

    def test_summary_reports_failures(self, tmp_path: Path):
        manifest = {
            "experiment": "bohm",
            "checks": [{"name": "bohm.no_crossing", "passed": False, "severity": "error"}],
        }
        (tmp_path / "manifest.json").write_text(json.dumps(manifest))
        result = run_cli("summary", str(tmp_path))
        assert result.returncode == 1
        assert "bohm.no_crossing" in result.stdout

    def test_summary_nothing_found(self, tmp_path: Path):
        result = run_cli("summary", str(tmp_path / "missing" / "*.json"))
        assert result.returncode == 2
        assert "No manifest files found" in result.stderr

    def test_summary_empty(self):
        """No manifests at all only warns."""
        result = run_cli("summary", "--no-colour")
        assert result.returncode == 0
        assert "No manifests to summarise" in result.stdout

    def test_summary_unreadable(self, tmp_path: Path):
        (tmp_path / "manifest.json").write_text("{broken")
        result = run_cli("summary", str(tmp_path))
        assert result.returncode == 2
        assert "Error reading manifest" in result.stderr


class TestInProcess:
    """main() and helpers without a subprocess."""

    def test_main_returns_exit_code(self, tmp_path: Path):
        assert main(["finegrain", "--out", str(tmp_path), "--quiet"]) == 0

    def test_main_usage_error(self):
        assert main(["finegrain", "--seed", "many"]) == 2

    def test_expand_paths(self, tmp_path: Path):
        (tmp_path / "a.json").write_text("{}")
        (tmp_path / "b.json").write_text("{}")
        found = expand_paths([str(tmp_path / "*.json"), str(tmp_path / "absent.json")])
        assert found == [tmp_path / "a.json", tmp_path / "b.json"]
