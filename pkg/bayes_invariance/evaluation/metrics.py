"""Selection scores and heterogeneity diagnostics against a known ground truth.

mu(z) is the environment-averaged KL divergence between each local conditional
p_e(y | x^z) and the pooled conditional g(y | x^z) of the environment mixture.
g is a mixture of the local Gaussian conditionals weighted by the local
marginal densities of x^z, so the KL has no closed form and is estimated by
Monte Carlo from the analytic joint of every environment. Environments are
weighted uniformly.
"""
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import multivariate_normal, norm

from ..config import BIP_MC_SAMPLES
from ..data.dataset import FeatureSelector
from ..data.prior import OUTSIDE_SUPPORT, Prior, enumerate_support, prior_log_mass
from ..errors import (
    ConfigInvalid,
    DataIOError,
    DimensionMismatch,
    NonPositiveVariance,
    TruthOutsideSupport,
)
from ..inference.exact import PosteriorTable
from ..simulation.synthetic import GroundTruth, joint_moments, true_conditional_params
from ..utils.logging import logger


def score(z_hat: FeatureSelector, z_star: FeatureSelector) -> tuple[bool, bool]:
    """(exact, covered): z_hat equals z_star / z_hat selects a subset of z_star."""
    if len(z_hat) != len(z_star):
        raise DimensionMismatch(f"Cannot compare selectors of length {len(z_hat)} and {len(z_star)}")
    return z_hat.bits == z_star.bits, z_hat.is_subset_of(z_star)


@dataclass(frozen=True)
class ReplicateScore:
    z_hat: FeatureSelector
    z_star: FeatureSelector
    exact: bool
    covered: bool


@dataclass(frozen=True)
class EvalReport:
    exact_discovery: float
    coverage: float
    per_replicate: tuple[ReplicateScore, ...] = ()

    @classmethod
    def from_replicates(cls, pairs: Sequence[tuple[FeatureSelector, FeatureSelector]]) -> "EvalReport":
        """Score (z_hat, z_star) pairs and average the flags."""
        if not pairs:
            raise ConfigInvalid("Cannot build an evaluation report from zero replicates")
        rows = tuple(ReplicateScore(z_hat, z_star, *score(z_hat, z_star)) for z_hat, z_star in pairs)
        return cls(
            exact_discovery=float(np.mean([r.exact for r in rows])),
            coverage=float(np.mean([r.covered for r in rows])),
            per_replicate=rows,
        )

    def to_dict(self) -> dict:
        return {
            "exact_discovery": self.exact_discovery,
            "coverage": self.coverage,
            "per_replicate": [
                {"z_hat": str(r.z_hat), "z_star": str(r.z_star), "exact": r.exact, "covered": r.covered}
                for r in self.per_replicate
            ],
        }


def gaussian_kl(m1: float, v1: float, m2: float, v2: float) -> float:
    """KL(N(m1, v1) || N(m2, v2)) for univariate normals."""
    if v1 <= 0 or v2 <= 0:
        raise NonPositiveVariance(f"Variances must be positive, got v1={v1}, v2={v2}")
    return 0.5 * math.log(v2 / v1) + (v1 + (m1 - m2) ** 2) / (2.0 * v2) - 0.5


def tv_to_dirac(table: PosteriorTable, z_star: FeatureSelector) -> float:
    """Total variation between the posterior and the point mass at z_star: 1 - p(z_star | D)."""
    entry = table.lookup(z_star)
    if entry is None:
        raise TruthOutsideSupport(f"True selector {z_star} is not among the posterior's candidates")
    return min(1.0, max(0.0, 1.0 - entry.posterior))


@dataclass(frozen=True)
class MuEstimate:
    value: float
    std_error: float


def _check_envs(gt: GroundTruth, envs: Optional[Sequence[int]]) -> list[int]:
    envs = list(range(gt.n_envs)) if envs is None else [int(e) for e in envs]
    if not envs:
        raise ConfigInvalid("At least one environment is required")
    bad = [e for e in envs if not 0 <= e < gt.n_envs]
    if bad:
        raise ConfigInvalid(f"Environment ids {bad} out of range for {gt.n_envs} environments")
    return envs


def mu_of_z(
    gt: GroundTruth,
    z: FeatureSelector,
    envs: Optional[Sequence[int]] = None,
    n_samples: Optional[int] = None,
    seed: int = 0,
) -> MuEstimate:
    """Monte Carlo estimate of mu(z) with its standard error.

    Args:
        gt: Ground truth with structural parameters per environment
        z: Candidate selector
        envs: Environment ids to average over (default: all)
        n_samples: Draws per environment (default BIP_MC_SAMPLES)
        seed: Sampling seed; one stream per environment

    Returns:
        MuEstimate; exactly 0 for a single environment
    """
    if len(z) != gt.p:
        raise DimensionMismatch(f"Selector has {len(z)} entries, ground truth has p={gt.p}")
    envs = _check_envs(gt, envs)
    if len(envs) == 1:
        return MuEstimate(0.0, 0.0)
    n_samples = BIP_MC_SAMPLES if n_samples is None else int(n_samples)
    if n_samples < 2:
        raise ConfigInvalid(f"Need at least 2 Monte Carlo samples, got {n_samples}")

    S = list(z.indices)
    conditionals = [true_conditional_params(gt, e, z) for e in envs]
    marginals = []
    for e in envs:
        mean, cov = joint_moments(gt, e)
        marginals.append((mean[S], cov[np.ix_(S, S)]))
    log_w = -math.log(len(envs))

    def log_x_density(X_sub: np.ndarray, k: int) -> np.ndarray:
        if not S:
            return np.zeros(len(X_sub))
        mean, cov = marginals[k]
        return np.atleast_1d(multivariate_normal.logpdf(X_sub, mean=mean, cov=cov, allow_singular=True))

    streams = np.random.SeedSequence(seed).spawn(len(envs))
    per_env_mean = np.empty(len(envs))
    per_env_var = np.empty(len(envs))
    for i, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        if S:
            X_sub = rng.multivariate_normal(marginals[i][0], marginals[i][1], size=n_samples, method="cholesky")
        else:
            X_sub = np.zeros((n_samples, 0))
        local = conditionals[i]
        y = local.mean(X_sub) + rng.standard_normal(n_samples) * math.sqrt(local.variance)

        # log of sum_k w_k p_k(x) p_k(y|x) minus log of sum_k w_k p_k(x)
        log_x = np.stack([log_w + log_x_density(X_sub, k) for k in range(len(envs))])
        log_y = np.stack(
            [norm.logpdf(y, loc=c.mean(X_sub), scale=math.sqrt(c.variance)) for c in conditionals]
        )
        log_g = logsumexp(log_x + log_y, axis=0) - logsumexp(log_x, axis=0)
        terms = log_y[i] - log_g

        per_env_mean[i] = float(np.mean(terms))
        per_env_var[i] = float(np.var(terms, ddof=1)) / n_samples

    value = float(np.mean(per_env_mean))
    std_error = float(math.sqrt(np.sum(per_env_var)) / len(envs))
    return MuEstimate(value, std_error)


@dataclass
class TheoryDiagnostics:
    mu: dict[str, float]
    mu_std_error: dict[str, float]
    mu_min: float
    mu_min_std_error: float
    R: float
    envs: tuple[int, ...]
    n_samples: int
    z_star: str
    tv_to_truth: Optional[float] = None
    argmin: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "z_star": self.z_star,
            "envs": list(self.envs),
            "n_samples": self.n_samples,
            "mu": self.mu,
            "mu_std_error": self.mu_std_error,
            "mu_min": self.mu_min,
            "mu_min_std_error": self.mu_min_std_error,
            "mu_min_selector": self.argmin,
            "R": self.R,
            "tv_to_truth": self.tv_to_truth,
            **self.extra,
        }


def prior_factor(prior: Prior, z_star: FeatureSelector, max_p: Optional[int] = None) -> float:
    """R = max over supported z != z_star of p(z)/p(z_star), times the support size."""
    log_star = prior_log_mass(prior, z_star)
    if log_star is OUTSIDE_SUPPORT:
        raise TruthOutsideSupport(f"True selector {z_star} has zero prior mass")
    best = -math.inf
    for z in enumerate_support(prior, max_p=max_p):
        if z.bits != z_star.bits:
            best = max(best, prior_log_mass(prior, z) - log_star)
    if best == -math.inf:
        best = 0.0
    return float(math.exp(best) * prior.support_size())


def mu_min_and_R(
    gt: GroundTruth,
    prior: Prior,
    envs: Optional[Sequence[int]] = None,
    n_samples: Optional[int] = None,
    seed: int = 0,
    threads: int = 1,
    max_p: Optional[int] = None,
) -> TheoryDiagnostics:
    """mu(z) for every supported z != z*, their minimum, and the prior factor R.

    Every selector is estimated with the same seed, so the estimates do not
    depend on the worker count.
    """
    if prior.p != gt.p:
        raise DimensionMismatch(f"Prior is over {prior.p} features, ground truth has p={gt.p}")
    envs = _check_envs(gt, envs)
    n_samples = BIP_MC_SAMPLES if n_samples is None else int(n_samples)
    R = prior_factor(prior, gt.z_star, max_p=max_p)

    candidates = [z for z in enumerate_support(prior, max_p=max_p) if z.bits != gt.z_star.bits]
    logger.info(f"mu_min: {len(candidates)} selectors, {len(envs)} environments, {n_samples} draws each")

    def estimate(z: FeatureSelector) -> MuEstimate:
        return mu_of_z(gt, z, envs, n_samples, seed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            estimates = list(pool.map(estimate, candidates))
    else:
        estimates = [estimate(z) for z in candidates]

    mu_star = estimate(gt.z_star)
    mu = {str(gt.z_star): mu_star.value}
    mu_se = {str(gt.z_star): mu_star.std_error}
    for z, est in zip(candidates, estimates):
        mu[str(z)] = est.value
        mu_se[str(z)] = est.std_error

    if candidates:
        i = int(np.argmin([est.value for est in estimates]))
        mu_min, mu_min_se, argmin = estimates[i].value, estimates[i].std_error, str(candidates[i])
    else:
        logger.warning("Prior support contains only the true selector; mu_min is undefined")
        mu_min, mu_min_se, argmin = math.inf, 0.0, None

    return TheoryDiagnostics(
        mu=mu,
        mu_std_error=mu_se,
        mu_min=mu_min,
        mu_min_std_error=mu_min_se,
        R=R,
        envs=tuple(envs),
        n_samples=n_samples,
        z_star=str(gt.z_star),
        argmin=argmin,
    )


def write_json(document: dict, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(document, indent=2))
    except OSError as e:
        raise DataIOError(f"Could not write {path}: {e}") from e
    return path
