"""Tests for running experiments, artifact writing and manifest summaries."""

import json
from fractions import Fraction
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from branchlab import run_experiment, summarize
from branchlab.config import build_config
from branchlab.output import (
    MANIFEST_NAME,
    ArtifactWriter,
    default_output_dir,
    dumps,
    load_manifest,
    resolve_output_dir,
)
from branchlab.runner import report_summary, run
from branchlab.types import Check, ConfigError, RunManifest, Severity


def make_manifest(experiment: str = "finegrain", checks: list[Check] | None = None) -> RunManifest:
    """Create a RunManifest for testing."""
    return RunManifest(experiment=experiment, version="1.0.0", checks=checks or [])


class TestOutputDir:
    """Output directory resolution."""

    def test_env_var_wins(self, monkeypatch, tmp_path):
        """BRANCHLAB_OUT overrides everything."""
        monkeypatch.setenv("BRANCHLAB_OUT", str(tmp_path / "env"))
        monkeypatch.setenv("XDG_DATA_HOME", str(tmp_path / "xdg"))
        assert default_output_dir() == tmp_path / "env"
        assert resolve_output_dir(tmp_path / "requested") == tmp_path / "env"

    def test_xdg_data_home(self, monkeypatch, tmp_path):
        monkeypatch.setenv("XDG_DATA_HOME", str(tmp_path / "xdg"))
        assert default_output_dir() == tmp_path / "xdg" / "branchlab"

    def test_home_fallback(self):
        assert default_output_dir() == Path.home() / ".local" / "share" / "branchlab"

    def test_requested_used_without_env(self, tmp_path):
        assert resolve_output_dir(tmp_path / "requested") == tmp_path / "requested"


class TestArtifactWriter:
    """Tables and documents on disk."""

    def test_csv_full_precision(self, out_dir):
        """Floats are written with 17 significant digits and LF endings."""
        writer = ArtifactWriter(out_dir, "csv")
        writer.write_table("values", pd.DataFrame({"x": [0.1, 1 / 3]}))
        text = (out_dir / "values.csv").read_bytes().decode()
        assert text == "x\n0.10000000000000001\n0.33333333333333331\n"
        assert writer.written == ["values.csv"]

    def test_both_formats(self, out_dir):
        writer = ArtifactWriter(out_dir, "both")
        writer.write_table("values", pd.DataFrame({"k": [1, 2]}))
        assert sorted(writer.written) == ["values.csv", "values.json"]
        assert json.loads((out_dir / "values.json").read_text()) == [{"k": 1}, {"k": 2}]

    def test_json_only(self, out_dir):
        writer = ArtifactWriter(out_dir, "json")
        writer.write_table("values", pd.DataFrame({"k": [1]}))
        assert not (out_dir / "values.csv").exists()

    def test_document_types(self, out_dir):
        """numpy, Fraction and complex values serialise."""
        writer = ArtifactWriter(out_dir)
        writer.write_document("doc", {
            "array": np.arange(3),
            "scalar": np.float64(0.5),
            "weight": Fraction(3, 5),
            "amplitude": 1 + 2j,
        })
        data = json.loads((out_dir / "doc.json").read_text())
        assert data == {
            "array": [0, 1, 2],
            "scalar": 0.5,
            "weight": [3, 5],
            "amplitude": [1.0, 2.0],
        }

    def test_unserialisable(self):
        with pytest.raises(TypeError, match="set"):
            dumps({"bad": {1, 2}})


class TestManifest:
    """manifest.json round trips."""

    def test_round_trip(self, out_dir):
        manifest = make_manifest(checks=[
            Check("a", True, 1e-13, 1e-12),
            Check("b", False, 3.0, 1.0, Severity.WARNING, "drifted"),
        ])
        path = ArtifactWriter(out_dir).write_manifest(manifest)
        assert path.name == MANIFEST_NAME
        loaded = load_manifest(out_dir)
        assert loaded == manifest
        data = json.loads(path.read_text())
        assert data["passed"] is True
        assert data["warning_count"] == 1


class TestRun:
    """End-to-end runs through the runner."""

    def test_finegrain_writes_artifacts(self, out_dir):
        config = build_config("finegrain", output_dir=out_dir)
        manifest = run(config)
        assert manifest.passed
        assert manifest.check_count > 0
        assert (out_dir / MANIFEST_NAME).exists()
        assert "fine_branches.csv" in manifest.artifacts
        assert "fine_grained.json" in manifest.artifacts
        for name in manifest.artifacts:
            assert (out_dir / name).exists()

    def test_manifest_records_config(self, out_dir):
        manifest = run(build_config("finegrain", master_seed=17, output_dir=out_dir))
        assert manifest.config["master_seed"] == 17
        assert manifest.config["params"]["weights"] == ["3/5", "2/5"]
        assert manifest.version == "1.0.0"

    def test_identical_reruns(self, tmp_path):
        """Data artifacts do not depend on the run."""
        first = run(build_config("finegrain", output_dir=tmp_path / "a"))
        run(build_config("finegrain", output_dir=tmp_path / "b"))
        for name in first.artifacts:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_env_var_redirects(self, monkeypatch, tmp_path):
        monkeypatch.setenv("BRANCHLAB_OUT", str(tmp_path / "env"))
        run(build_config("finegrain", output_dir=tmp_path / "requested"))
        assert (tmp_path / "env" / MANIFEST_NAME).exists()
        assert not (tmp_path / "requested").exists()

    def test_large_n_quoted_ratio_is_a_warning(self, out_dir):
        """The quoted class ratio misses by far but only warns."""
        params = {"N": 10_000, "runs": 0, "washout_sizes": [100]}
        manifest = run_experiment("large-n", params, out_dir=out_dir)
        assert manifest.passed
        assert manifest.warning_count == 1
        ratio = next(c for c in manifest.checks if c.name == "largen.quoted_ratio")
        assert 1590 < ratio.measured < 1600

    def test_api_validates(self, out_dir):
        with pytest.raises(ConfigError):
            run_experiment("finegrain", {"weights": "3/5"}, out_dir=out_dir)


class TestReportSummary:
    """Aggregating manifests."""

    def test_empty(self):
        table = report_summary([])
        assert table.exit_code == 0
        assert table.rows == []
        assert table.warnings == ["No manifests to summarise"]

    def test_all_pass(self):
        table = report_summary([make_manifest(checks=[Check("a", True)])])
        assert table.exit_code == 0
        assert table.failed == []

    def test_error_failure(self):
        table = report_summary([
            make_manifest(checks=[Check("a", True)]),
            make_manifest("bohm", [Check("bohm.no_crossing", False, 2, 0)]),
        ])
        assert table.exit_code == 1
        assert [r.check for r in table.failed] == ["bohm.no_crossing"]

    def test_warning_does_not_fail(self):
        table = report_summary([
            make_manifest(
                "large-n", [Check("largen.quoted_ratio", False, severity=Severity.WARNING)]
            ),
        ])
        assert table.exit_code == 0
        assert table.warnings == ["large-n: largen.quoted_ratio"]

    def test_info_ignored(self):
        table = report_summary([make_manifest(checks=[Check("x", False, severity=Severity.INFO)])])
        assert table.exit_code == 0
        assert table.warnings == []

    def test_summarize_paths(self, tmp_path):
        run_experiment("finegrain", out_dir=tmp_path / "a")
        run_experiment("finegrain", out_dir=tmp_path / "b")
        table = summarize([tmp_path / "a", tmp_path / "b" / MANIFEST_NAME])
        assert table.exit_code == 0
        assert {r.experiment for r in table.rows} == {"finegrain"}
        assert len(table.rows) == 2 * len(load_manifest(tmp_path / "a").checks)
