"""
Unit tests for the MCP tools and the runs:// resource.
"""
import json
from unittest.mock import patch

import pytest


class TestFileTools:
    """Tests for tools in tools/files.py."""

    @pytest.mark.unit
    def test_list_output_files_missing_dir(self, tmp_path):
        """A missing output directory is reported, not created."""
        with patch("bayes_invariance.tools.files.BIP_OUTPUT_DIR", tmp_path / "absent"):
            from bayes_invariance.tools.files import list_output_files

            result = list_output_files()

            assert "does not exist yet" in result

    @pytest.mark.unit
    def test_list_output_files_empty(self, tmp_path):
        """An empty output directory has no files."""
        with patch("bayes_invariance.tools.files.BIP_OUTPUT_DIR", tmp_path):
            from bayes_invariance.tools.files import list_output_files

            assert "No files found" in list_output_files()

    @pytest.mark.unit
    def test_list_output_files_with_content(self, tmp_path):
        """Files in nested run directories are listed relative to the output directory."""
        (tmp_path / "run1").mkdir()
        (tmp_path / "run1" / "posterior.csv").write_text("z_bits,log_unnormalized,posterior\n")

        with patch("bayes_invariance.tools.files.BIP_OUTPUT_DIR", tmp_path):
            from bayes_invariance.tools.files import list_output_files

            result = list_output_files()

            assert "Run artefacts (1 files)" in result
            assert "run1/posterior.csv" in result

    @pytest.mark.unit
    def test_resolve_run_path(self, tmp_path):
        """Relative names resolve inside the output directory; absolute paths are kept."""
        with patch("bayes_invariance.tools.files.BIP_OUTPUT_DIR", tmp_path):
            from bayes_invariance.tools.files import resolve_run_path

            assert resolve_run_path("a/b.csv") == tmp_path / "a" / "b.csv"
            assert resolve_run_path(str(tmp_path / "x.csv")) == tmp_path / "x.csv"


class TestWorkflowTools:
    """Tests for simulate, fit and diagnostics tools chained through the output directory."""

    @pytest.mark.unit
    def test_simulate_fit_evaluate(self, tmp_path):
        """Simulate an example, fit it exactly and score the posterior mode."""
        with patch("bayes_invariance.tools.files.BIP_OUTPUT_DIR", tmp_path):
            from bayes_invariance.tools.diagnostics import evaluate_selection
            from bayes_invariance.tools.inference import fit_exact_posterior
            from bayes_invariance.tools.simulation import simulate_dataset

            summary = simulate_dataset(preset="uq-example1", n=100, seed=1)
            assert "z* = 10" in summary
            assert (tmp_path / "uq-example1-seed1" / "dataset.csv").is_file()

            fitted = fit_exact_posterior("uq-example1-seed1/dataset.csv")
            assert "Posterior mode" in fitted
            assert "Top 5 candidates" in fitted
            assert (tmp_path / "uq-example1-seed1" / "posterior.csv").is_file()

            scored = evaluate_selection("uq-example1-seed1/posterior.csv", "uq-example1-seed1/ground_truth.json")
            assert "true invariant set 10" in scored

    @pytest.mark.unit
    def test_fit_variational_writes_outputs(self, tmp_path):
        """fit_variational writes its log and selections next to the dataset."""
        config = tmp_path / "vi.json"
        config.write_text(json.dumps({"version": 1, "T": 10, "M": 4, "elbo_every": 5}))
        with patch("bayes_invariance.tools.files.BIP_OUTPUT_DIR", tmp_path):
            from bayes_invariance.tools.inference import fit_variational
            from bayes_invariance.tools.simulation import simulate_dataset

            simulate_dataset(preset="uq-example2", n=50, out_dir="vi-run")
            result = fit_variational("vi-run/dataset.csv", config_path=str(config))

            assert "VI finished after 10 steps" in result
            selections = json.loads((tmp_path / "vi-run" / "selections.json").read_text())
            assert set(selections["selections"]) == {"0.5", "0.6", "0.7", "0.8", "0.9"}
            assert len((tmp_path / "vi-run" / "vi_log.jsonl").read_text().splitlines()) == 11

    @pytest.mark.unit
    def test_fit_exact_too_large_points_to_vi(self, tmp_path):
        """Enumeration beyond the cap suggests the variational tool."""
        with patch("bayes_invariance.tools.files.BIP_OUTPUT_DIR", tmp_path):
            from bayes_invariance.tools.inference import fit_exact_posterior
            from bayes_invariance.tools.simulation import simulate_dataset

            simulate_dataset(preset="appendix-c3-p10", p=30, n=20, envs=2, out_dir="wide")
            result = fit_exact_posterior("wide/dataset.csv")

            assert result.startswith("Error:")
            assert "fit_variational" in result

    @pytest.mark.unit
    def test_theory_diagnostics(self, tmp_path):
        """mu is listed per candidate with z* marked, and theory.json is written."""
        with patch("bayes_invariance.tools.files.BIP_OUTPUT_DIR", tmp_path):
            from bayes_invariance.tools.diagnostics import theory_diagnostics
            from bayes_invariance.tools.simulation import simulate_dataset

            simulate_dataset(preset="uq-example1", n=20, out_dir="theory")
            result = theory_diagnostics("theory/ground_truth.json", samples=500)

            assert "10: " in result and "<- z*" in result
            assert json.loads((tmp_path / "theory" / "theory.json").read_text())["R"] == pytest.approx(4.0)

    @pytest.mark.unit
    def test_errors_are_returned_as_text(self, tmp_path):
        """Domain errors come back as 'Error: ...' strings."""
        with patch("bayes_invariance.tools.files.BIP_OUTPUT_DIR", tmp_path):
            from bayes_invariance.tools.inference import fit_exact_posterior
            from bayes_invariance.tools.simulation import simulate_dataset

            assert fit_exact_posterior("missing/dataset.csv").startswith("Error:")
            assert simulate_dataset(preset="nope").startswith("Error:")


class TestRunsResource:
    """Tests for the runs:// resource."""

    @pytest.mark.unit
    def test_reads_file(self, tmp_path):
        """Text artefacts are returned verbatim."""
        (tmp_path / "theory.json").write_text('{"R": 8}')
        with patch("bayes_invariance.resources.outputs.BIP_OUTPUT_DIR", tmp_path):
            from bayes_invariance.resources.outputs import get_run_file

            assert get_run_file("theory.json") == '{"R": 8}'

    @pytest.mark.unit
    def test_rejects_escape(self, tmp_path):
        """Paths outside the output directory are refused."""
        (tmp_path / "secret.txt").write_text("x")
        runs = tmp_path / "runs"
        runs.mkdir()
        with patch("bayes_invariance.resources.outputs.BIP_OUTPUT_DIR", runs):
            from bayes_invariance.resources.outputs import get_run_file

            with pytest.raises(ValueError, match="Access denied"):
                get_run_file("../secret.txt")
