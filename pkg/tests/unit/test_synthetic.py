"""
Unit tests for simulation/synthetic.py.
"""
import json

import numpy as np
import pytest

from bayes_invariance.data.dataset import FeatureSelector
from bayes_invariance.errors import ConfigInvalid, DataIOError
from bayes_invariance.simulation.presets import get_preset
from bayes_invariance.simulation.synthetic import (
    BoundRule,
    SynthConfig,
    generate,
    joint_moments,
    read_ground_truth,
    sample_environment,
    true_conditional_params,
    write_ground_truth,
)


class TestConfig:
    """Tests for SynthConfig and BoundRule."""

    @pytest.mark.unit
    def test_bound_rule(self):
        """scale * (m + offset) ** power"""
        assert BoundRule(0.01, 1.0, 2.0)(0.49) == pytest.approx(0.25)
        assert BoundRule(0.5, 2.0, 1.0)(1.0) == pytest.approx(3.0)

    @pytest.mark.unit
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"p": 0},
            {"p_star_max": 4},
            {"lb": 3.0, "ub": 2.0},
            {"sigma_min_sq": 0.0},
            {"rho_int_range": (0.5, 1.2)},
            {"m_range": (1.0, 0.0)},
            {"p_act": (1.5,)},
        ],
    )
    def test_invalid(self, kwargs):
        """Inconsistent settings raise ConfigInvalid."""
        with pytest.raises(ConfigInvalid):
            SynthConfig(**kwargs).validate()

    @pytest.mark.unit
    def test_with_strength(self):
        """with_strength pins the intervened fraction range."""
        assert SynthConfig().with_strength(0.5).rho_int_range == (0.5, 0.5)


class TestGenerate:
    """Tests for generate."""

    @pytest.mark.unit
    def test_deterministic(self):
        """Identical configurations give identical data and truth."""
        cfg = get_preset("appendix-c1-p3", seed=5)
        data_a, truth_a = generate(cfg)
        data_b, truth_b = generate(cfg)
        assert truth_a.z_star == truth_b.z_star
        assert truth_a.order == truth_b.order
        for a, b in zip(data_a.environments, data_b.environments):
            np.testing.assert_array_equal(a.X, b.X)
            np.testing.assert_array_equal(a.y, b.y)

    @pytest.mark.unit
    def test_different_seeds_differ(self):
        """Changing the seed changes the sample."""
        data_a, _ = generate(get_preset("appendix-c1-p3", seed=1))
        data_b, _ = generate(get_preset("appendix-c1-p3", seed=2))
        assert not np.array_equal(data_a.environments[0].y, data_b.environments[0].y)

    @pytest.mark.unit
    @pytest.mark.parametrize("seed", range(5))
    def test_z_star_is_predecessors_of_y(self, seed):
        """Every node before y in the ordering is a parent of y."""
        data, truth = generate(get_preset("appendix-c3-p10", seed=seed))
        predecessors = set(truth.order[: truth.y_position - 1])
        assert set(truth.z_star.indices) == predecessors
        assert 1 <= truth.z_star.cardinality <= 5
        assert data.p == 10 and data.n_envs == 5 and data.sizes == (500,) * 5

    @pytest.mark.unit
    def test_outcome_mechanism_never_intervened(self, c1_truth):
        """y's weights, intercept and variance are the same in every environment."""
        _, truth = c1_truth
        y = truth.p
        base = truth.env_params[0]
        for params in truth.env_params[1:]:
            np.testing.assert_array_equal(params.weights[y], base.weights[y])
            assert params.intercepts[y] == base.intercepts[y]
            assert params.variances[y] == base.variances[y]

    @pytest.mark.unit
    @pytest.mark.parametrize("strength, count", [(1 / 3, 1), (2 / 3, 2), (1.0, 3)])
    def test_intervened_counts(self, strength, count):
        """ceil(strength * p) features are intervened in each interventional environment."""
        _, truth = generate(get_preset("appendix-c1-p3", strength=strength, seed=3))
        assert truth.intervened[0] == ()
        assert all(len(s) == count for s in truth.intervened[1:])
        assert truth.intervened_fraction(1) == pytest.approx(count / 3)

    @pytest.mark.unit
    def test_single_environment(self):
        """E=1 produces only the observational environment."""
        data, truth = generate(get_preset("appendix-c1-p3", E=1, seed=0))
        assert data.n_envs == 1
        assert truth.intervened == ((),)


class TestAnalyticMoments:
    """Tests for joint_moments and true_conditional_params."""

    @pytest.mark.unit
    def test_moments_match_large_sample(self, c1_truth):
        """Analytic mean and covariance agree with a large ancestral sample."""
        _, truth = c1_truth
        n = 50_000
        for e in (0, 2):
            mean, cov = joint_moments(truth, e)
            X, y = sample_environment(truth.env_params[e], truth.order, n, np.random.default_rng(e))
            values = np.column_stack([X, y])
            sd = np.sqrt(np.diag(cov))
            assert np.all(np.abs(values.mean(axis=0) - mean) <= 6 * sd / np.sqrt(n))
            cov_se = np.sqrt((np.outer(np.diag(cov), np.diag(cov)) + cov ** 2) / n)
            assert np.all(np.abs(np.cov(values, rowvar=False) - cov) <= 6 * cov_se)

    @pytest.mark.unit
    def test_invariant_conditional_is_structural_equation(self, c1_truth):
        """Conditioning y on its parents recovers y's structural equation in every environment."""
        _, truth = c1_truth
        y = truth.p
        parents = list(truth.z_star.indices)
        for e in range(truth.n_envs):
            params = truth.env_params[e]
            cond = true_conditional_params(truth, e, truth.z_star)
            np.testing.assert_allclose(cond.coef, params.weights[y, parents], atol=1e-6)
            assert cond.intercept == pytest.approx(params.intercepts[y], abs=1e-6)
            assert cond.variance == pytest.approx(params.variances[y], rel=1e-6)

    @pytest.mark.unit
    def test_empty_selector_is_marginal(self, c1_truth):
        """With no features the conditional is y's marginal."""
        _, truth = c1_truth
        mean, cov = joint_moments(truth, 1)
        cond = true_conditional_params(truth, 1, FeatureSelector.empty(3))
        assert cond.intercept == pytest.approx(mean[3])
        assert cond.variance == pytest.approx(cov[3, 3])


class TestGroundTruthIO:
    """Tests for ground-truth sidecar files."""

    @pytest.mark.unit
    def test_write_and_read(self, c1_truth, tmp_path):
        """The reloaded truth has the same structure and parameters."""
        _, truth = c1_truth
        loaded = read_ground_truth(write_ground_truth(truth, tmp_path / "ground_truth.json"))
        assert loaded.z_star == truth.z_star
        assert loaded.order == truth.order
        assert loaded.intervened == truth.intervened
        assert loaded.permutation == truth.permutation
        for a, b in zip(loaded.env_params, truth.env_params):
            np.testing.assert_array_equal(a.weights, b.weights)
            np.testing.assert_array_equal(a.intercepts, b.intercepts)
            np.testing.assert_array_equal(a.variances, b.variances)

    @pytest.mark.unit
    def test_one_based_ids_in_file(self, c1_truth, tmp_path):
        """The permutation lists node ids 1..p+1."""
        _, truth = c1_truth
        path = write_ground_truth(truth, tmp_path / "gt.json")
        document = json.loads(path.read_text())
        assert sorted(document["permutation"]) == [1, 2, 3, 4]
        assert document["z_star"] == str(truth.z_star)

    @pytest.mark.unit
    def test_malformed(self, tmp_path):
        """Missing keys raise DataIOError."""
        path = tmp_path / "gt.json"
        path.write_text('{"z_star": "10"}')
        with pytest.raises(DataIOError):
            read_ground_truth(path)
