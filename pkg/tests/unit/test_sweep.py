"""
Unit tests for evaluation/sweep.py on small grids.
"""
import math
from unittest.mock import patch

import pandas as pd
import pytest

from bayes_invariance.errors import ConfigInvalid, SupportTooLarge
from bayes_invariance.evaluation import sweep as sweep_module
from bayes_invariance.evaluation.sweep import (
    SWEEP_COLUMNS,
    THEORY_COLUMNS,
    SweepConfig,
    run_replicate,
    run_sweep,
    write_sweep_csv,
)
from bayes_invariance.inference.variational import VIConfig


def _small(**kwargs):
    base = dict(
        preset="appendix-c1-p3",
        n_values=(40,),
        E_values=(3,),
        strengths=(1.0,),
        replicates=2,
        methods=("exact", "pooled-regression"),
        seed=5,
    )
    base.update(kwargs)
    return SweepConfig(**base)


class TestSweepConfig:
    """Tests for SweepConfig validation."""

    @pytest.mark.unit
    @pytest.mark.parametrize(
        "kwargs",
        [{"methods": ()}, {"methods": ("lasso",)}, {"replicates": 0}, {"n_values": ()}, {"threshold": 1.0}],
    )
    def test_invalid(self, kwargs):
        """Empty or unknown methods and empty grids raise ConfigInvalid."""
        with pytest.raises(ConfigInvalid):
            _small(**kwargs)


class TestRunSweep:
    """Tests for run_replicate and run_sweep."""

    @pytest.mark.unit
    def test_shared_data_across_methods(self):
        """Every method in a replicate is scored against the same truth."""
        result = run_replicate(_small(methods=("exact", "oracle-regression")), 40, 3, 1.0, 0)
        assert set(result.selections) == {"exact", "oracle-regression"}
        assert 0.0 <= result.mass_at_truth["exact"] <= 1.0
        assert math.isnan(result.mass_at_truth["oracle-regression"])
        assert result.selections["oracle-regression"].is_subset_of(result.z_star)

    @pytest.mark.unit
    def test_rows_and_determinism(self):
        """One row per (cell, method); rerunning gives identical rows."""
        cfg = _small(strengths=(1 / 3, 1.0))
        first = run_sweep(cfg).rows
        second = run_sweep(cfg).rows
        assert list(first.columns) == SWEEP_COLUMNS
        assert len(first) == 4
        assert (first["status"] == "ok").all()
        assert (first["coverage"] >= first["exact_rate"]).all()
        pd.testing.assert_frame_equal(first, second)

    @pytest.mark.unit
    def test_threads_do_not_change_rows(self):
        """Replicate seeds do not depend on scheduling."""
        one = run_sweep(_small()).rows
        two = run_sweep(_small(threads=2)).rows
        pd.testing.assert_frame_equal(one, two)

    @pytest.mark.unit
    def test_vi_method(self):
        """VI runs with the sweep's VI settings and reports mass at the truth."""
        rows = run_sweep(_small(methods=("vi",), replicates=1, vi=VIConfig(T=20, M=4, elbo_every=10))).rows
        assert rows.loc[0, "status"] == "ok"
        assert 0.0 <= rows.loc[0, "mass_at_truth"] <= 1.0

    @pytest.mark.unit
    def test_partial_failure(self):
        """A failed fit is counted and the cell is marked partial; other methods are unaffected."""
        real = sweep_module.exact_posterior
        calls = {"count": 0}

        def flaky(*args, **kwargs):
            calls["count"] += 1
            if calls["count"] == 1:
                raise SupportTooLarge("refusing to enumerate")
            return real(*args, **kwargs)

        with patch("bayes_invariance.evaluation.sweep.exact_posterior", side_effect=flaky):
            rows = run_sweep(_small()).rows
        exact = rows[rows["method"] == "exact"].iloc[0]
        pooled = rows[rows["method"] == "pooled-regression"].iloc[0]
        assert exact["status"] == "partial"
        assert (exact["failures"], exact["replicates"]) == (1, 1)
        assert pooled["status"] == "ok"

    @pytest.mark.unit
    def test_unexpected_exception_is_contained(self):
        """A non-domain error in one method marks that method failed and the sweep continues."""
        with patch(
            "bayes_invariance.evaluation.sweep.pooled_regression", side_effect=ValueError("exog contains inf or nans")
        ):
            rows = run_sweep(_small()).rows
            result = run_replicate(_small(), 40, 3, 1.0, 0)
        pooled = rows[rows["method"] == "pooled-regression"].iloc[0]
        exact = rows[rows["method"] == "exact"].iloc[0]
        assert pooled["status"] == "failed"
        assert pooled["failures"] == 2
        assert exact["status"] == "ok"
        assert "inf or nans" in result.errors["pooled-regression"]
        assert "exact" in result.selections

    @pytest.mark.unit
    def test_all_failed(self):
        """A method that never succeeds is marked failed with NaN rates."""
        with patch("bayes_invariance.evaluation.sweep.exact_posterior", side_effect=SupportTooLarge("no")):
            rows = run_sweep(_small(methods=("exact",))).rows
        assert rows.loc[0, "status"] == "failed"
        assert math.isnan(rows.loc[0, "exact_rate"])

    @pytest.mark.unit
    def test_theory_rows(self):
        """Theory mode adds one mu_min row per cell with R for the uniform prior."""
        result = run_sweep(_small(methods=("pooled-regression",), theory=True, mc_samples=200))
        assert list(result.theory.columns) == THEORY_COLUMNS
        assert len(result.theory) == 1
        assert result.theory.loc[0, "R"] == pytest.approx(8.0)
        assert result.theory.loc[0, "replicates"] == 2

    @pytest.mark.unit
    def test_write_csv(self, tmp_path):
        """The CSV has the documented header."""
        path = write_sweep_csv(run_sweep(_small(replicates=1)).rows, tmp_path / "sweep.csv")
        assert path.read_text().splitlines()[0] == ",".join(SWEEP_COLUMNS)
