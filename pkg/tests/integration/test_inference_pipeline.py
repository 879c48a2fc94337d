"""
Integration tests: simulate, fit and score across modules.

Tests marked slow run at full replicate counts; the unmarked variants use
reduced counts with the same thresholds where the statistics allow it.
"""
import numpy as np
import pytest

from bayes_invariance.data.dataset import FeatureSelector, from_blocks
from bayes_invariance.data.prior import Prior
from bayes_invariance.evaluation.metrics import EvalReport, mu_min_and_R
from bayes_invariance.inference.exact import exact_posterior, posterior_mode
from bayes_invariance.inference.gaussian_mle import fit_local_conditionals
from bayes_invariance.inference.variational import VIConfig, run_vi, variational_mode
from bayes_invariance.simulation.presets import get_preset
from bayes_invariance.simulation.synthetic import generate, true_conditional_params
from bayes_invariance.simulation.uq_examples import uq_example
from bayes_invariance.utils.common import derive_seed


def _mass(table, bits):
    entry = table.lookup(FeatureSelector.from_string(bits))
    return entry.posterior if entry else 0.0


def _uq1_masses(E, replicates):
    tables = [exact_posterior(uq_example(1, E=E, n=200, seed=r)[0], Prior.uniform_full(2), threads=1) for r in range(replicates)]
    return [{bits: _mass(t, bits) for bits in ("00", "01", "10", "11")} for t in tables]


def _mean_mass_at_truth(n, replicates, E=5):
    masses = []
    for r in range(replicates):
        data, truth = generate(get_preset("appendix-c1-p3", E=E, n=n, strength=1.0, seed=derive_seed(17, n, r)))
        masses.append(exact_posterior(data, Prior.uniform_full(3), threads=1).lookup(truth.z_star).posterior)
    return float(np.mean(masses))


@pytest.mark.integration
class TestSingleEnvironmentIdentity:
    """With one environment the posterior is the prior."""

    def test_random_datasets(self):
        """50 random datasets with p up to 6, under uniform and capped priors."""
        rng = np.random.default_rng(0)
        for _ in range(50):
            p = int(rng.integers(1, 7))
            n = int(rng.integers(10, 60))
            X = rng.normal(size=(n, p))
            y = X @ rng.normal(size=p) + rng.normal(size=n)
            data = from_blocks([(X, y)])

            uniform = exact_posterior(data, Prior.uniform_full(p), threads=1)
            np.testing.assert_allclose(uniform.probabilities, np.full(2 ** p, 2.0 ** -p), atol=1e-9)

            capped = Prior.max_cardinality(p, 1)
            table = exact_posterior(data, capped, threads=1)
            np.testing.assert_allclose(table.probabilities, np.full(p + 1, 1.0 / (p + 1)), atol=1e-9)


@pytest.mark.integration
class TestInvarianceByConstruction:
    """Large-sample local fits on z* agree across environments; other selectors drift."""

    def test_generator_z_star_fits_match_truth(self):
        """Every environment's fit on z* reproduces the shared true conditional."""
        for r in range(3):
            data, truth = generate(get_preset("appendix-c1-p3", E=5, n=20_000, strength=1.0, seed=derive_seed(41, r)))
            fits = fit_local_conditionals(data, truth.z_star)
            for e, (fit, block) in enumerate(zip(fits, data.environments)):
                true = true_conditional_params(truth, e, truth.z_star)
                X_sub = truth.z_star.select(block.X)
                rms = np.sqrt(np.mean((fit.mean(X_sub) - true.mean(X_sub)) ** 2))
                assert rms < 0.1 * np.sqrt(true.variance)
                assert fit.variance == pytest.approx(true.variance, rel=0.05)

    def test_example_fits_agree_on_z_star_only(self):
        """On the first example y | x1 is shared by all three environments, y | x2 is not."""
        data, truth = uq_example(1, E=3, n=20_000, seed=5)
        invariant = fit_local_conditionals(data, truth.z_star)
        for fit in invariant:
            assert fit.coef[0] == pytest.approx(1.0, abs=0.05)
            assert fit.intercept == pytest.approx(0.5, abs=0.2)
            assert fit.variance == pytest.approx(0.01, rel=0.05)

        drifting = fit_local_conditionals(data, FeatureSelector.from_string("01"))
        intercepts = [fit.intercept for fit in drifting]
        coefs = [fit.coef[0] for fit in drifting]
        assert max(intercepts) - min(intercepts) > 0.5
        assert max(coefs) - min(coefs) > 0.1


@pytest.mark.integration
class TestUqExampleOne:
    """Posterior mass on the first example process."""

    def test_two_environments_reduced(self):
        """With two environments the mass sits on the two invariant selectors."""
        masses = _uq1_masses(E=2, replicates=20)
        assert np.mean([m["10"] + m["11"] for m in masses]) >= 0.95

    def test_three_environments_reduced(self):
        """The third environment singles out x1."""
        masses = _uq1_masses(E=3, replicates=20)
        assert np.mean([m["10"] for m in masses]) >= 0.85
        wins = [m["10"] > max(v for k, v in m.items() if k != "10") for m in masses]
        assert np.mean(wins) >= 0.95

    @pytest.mark.slow
    def test_full_replicates(self):
        """200 replicates at n=200 for both environment counts."""
        two = _uq1_masses(E=2, replicates=200)
        three = _uq1_masses(E=3, replicates=200)
        assert np.mean([m["10"] + m["11"] for m in two]) >= 0.95
        assert np.mean([m["10"] for m in three]) >= 0.85
        wins = [m["10"] > max(v for k, v in m.items() if k != "10") for m in three]
        assert np.mean(wins) >= 0.95


@pytest.mark.integration
class TestConsistency:
    """Posterior mass at the truth grows with the sample size."""

    def test_trend_reduced(self):
        """More rows per environment never hurts on average."""
        assert _mean_mass_at_truth(200, replicates=30) >= _mean_mass_at_truth(10, replicates=30) - 0.02

    @pytest.mark.slow
    def test_trend_full(self):
        """Monotone across n in {10, 50, 200} (one 0.02 dip allowed) and at least 0.9 at n=200."""
        means = [_mean_mass_at_truth(n, replicates=200) for n in (10, 50, 200)]
        dips = [b - a for a, b in zip(means, means[1:]) if b < a]
        assert len(dips) <= 1 and all(d >= -0.02 for d in dips)
        assert means[-1] >= 0.9


@pytest.mark.integration
@pytest.mark.slow
class TestHeterogeneity:
    """mu_min grows with intervention strength and with the number of environments."""

    @staticmethod
    def _mu_mins(strength, envs, truths=200):
        values = []
        for r in range(truths):
            _, truth = generate(get_preset("appendix-c1-p3", E=5, n=10, strength=strength, seed=derive_seed(23, r)))
            diag = mu_min_and_R(truth, Prior.uniform_full(3), envs=envs, n_samples=2000, seed=r)
            values.append(diag.mu_min)
        values = np.array(values)
        return values.mean(), values.std(ddof=1) / np.sqrt(len(values))

    def test_strength(self):
        """Full-strength interventions separate z* more than a third of the features."""
        strong, strong_se = self._mu_mins(1.0, envs=None)
        weak, weak_se = self._mu_mins(1 / 3, envs=None)
        assert strong - weak > 3 * np.hypot(strong_se, weak_se)

    def test_environment_count(self):
        """Five environments separate z* more than the first two."""
        five, five_se = self._mu_mins(1.0, envs=None)
        two, two_se = self._mu_mins(1.0, envs=[0, 1])
        assert five - two > 3 * np.hypot(five_se, two_se)


@pytest.mark.integration
class TestVariationalAgreement:
    """VI selections against the exact posterior."""

    def test_uq_example(self):
        """VI recovers x1 on the three-environment example."""
        for seed in range(3):
            data, truth = uq_example(1, E=3, n=200, seed=seed)
            state = run_vi(data, Prior.uniform_full(2), VIConfig(T=300, M=10, seed=seed))
            assert variational_mode(state.best_phi, 0.5) == truth.z_star
            assert posterior_mode(exact_posterior(data, Prior.uniform_full(2), threads=1)) == truth.z_star

    @pytest.mark.slow
    def test_p10_many_environments(self):
        """p=10, E=20: VI matches the exact mode and the exact mode finds z* in most replicates."""
        agree, exact_hits = [], []
        for r in range(50):
            data, truth = generate(get_preset("appendix-c3-p10", E=20, n=500, strength=1.0, seed=derive_seed(31, r)))
            prior = Prior.uniform_full(10)
            mode = posterior_mode(exact_posterior(data, prior, threads=1))
            state = run_vi(data, prior, VIConfig(seed=r))
            agree.append(variational_mode(state.best_phi, 0.5) == mode)
            exact_hits.append(mode == truth.z_star)
        assert np.mean(agree) >= 0.8
        assert np.mean(exact_hits) >= 0.9

    @pytest.mark.slow
    def test_scaled_high_dimension(self):
        """p=60 with a cardinality cap of 10: VI finds z* in most replicates."""
        pairs = []
        for r in range(30):
            data, truth = generate(get_preset("appendix-c3-p450", p=60, E=20, n=500, seed=derive_seed(37, r)))
            state = run_vi(data, Prior.max_cardinality(60, 10), VIConfig(seed=r))
            pairs.append((variational_mode(state.best_phi, 0.5), truth.z_star))
        assert EvalReport.from_replicates(pairs).exact_discovery >= 0.6
