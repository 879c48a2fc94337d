"""Exact posterior over invariant feature selectors.

For each selector z in the prior support the evidence is the log likelihood
ratio between the pooled fit and the per-environment fits of y | x^z, summed
over every observation. The posterior is normalised in log space.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from ..config import BIP_THREADS
from ..data.dataset import FeatureSelector, MultiEnvDataset
from ..data.prior import Prior, enumerate_support, prior_log_mass
from ..errors import DataIOError, DimensionMismatch
from ..utils.logging import logger
from .gaussian_mle import fit_local_conditionals, fit_pooled_conditional, log_likelihood


@dataclass(frozen=True)
class LikelihoodRatioReport:
    """log Λ(z) with its per-environment breakdown."""

    z: FeatureSelector
    log_ratio: float
    per_env_log_ratio: np.ndarray
    env_sizes: tuple[int, ...]
    rank_deficient_envs: tuple[int, ...] = ()


def log_likelihood_ratio(data: MultiEnvDataset, z: FeatureSelector) -> LikelihoodRatioReport:
    """Σ_e Σ_i [log g(y_ei | x_ei^z) - log p_e(y_ei | x_ei^z)] with fitted conditionals."""
    if len(z) != data.p:
        raise DimensionMismatch(f"Selector has {len(z)} entries, dataset has p={data.p}")

    pooled = fit_pooled_conditional(data, z)
    local = fit_local_conditionals(data, z)

    per_env = np.empty(data.n_envs)
    for e, (block, model) in enumerate(zip(data.environments, local)):
        X_sub = z.select(block.X)
        per_env[e] = log_likelihood(pooled, X_sub, block.y) - log_likelihood(model, X_sub, block.y)
    per_env.setflags(write=False)

    flagged = tuple(e for e, m in enumerate(local) if m.rank_deficient)
    return LikelihoodRatioReport(z, float(np.sum(per_env)), per_env, data.sizes, flagged)


@dataclass(frozen=True)
class PosteriorEntry:
    selector: FeatureSelector
    log_prior: float
    log_ratio: float
    log_unnormalized: float
    posterior: float


@dataclass(frozen=True)
class PosteriorTable:
    """Normalised exact posterior, entries in enumeration order."""

    entries: tuple[PosteriorEntry, ...]
    log_normalizer: float

    @property
    def p(self) -> int:
        return len(self.entries[0].selector)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([entry.posterior for entry in self.entries])

    def lookup(self, z: FeatureSelector) -> Optional[PosteriorEntry]:
        for entry in self.entries:
            if entry.selector.bits == z.bits:
                return entry
        return None

    def top(self, count: int = 5) -> list[PosteriorEntry]:
        order = sorted(range(len(self.entries)), key=lambda i: (-self.entries[i].posterior, i))
        return [self.entries[i] for i in order[:count]]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "z_bits": [str(entry.selector) for entry in self.entries],
                "log_unnormalized": [entry.log_unnormalized for entry in self.entries],
                "posterior": [entry.posterior for entry in self.entries],
            }
        )


def _normalize(selectors, log_priors, log_ratios) -> PosteriorTable:
    log_unnormalized = np.asarray(log_priors) + np.asarray(log_ratios)
    log_normalizer = float(logsumexp(log_unnormalized))
    posterior = np.exp(log_unnormalized - log_normalizer)
    entries = tuple(
        PosteriorEntry(z, float(lp), float(lr), float(lu), float(q))
        for z, lp, lr, lu, q in zip(selectors, log_priors, log_ratios, log_unnormalized, posterior)
    )
    return PosteriorTable(entries, log_normalizer)


def exact_posterior(
    data: MultiEnvDataset,
    prior: Prior,
    threads: Optional[int] = None,
    max_p: Optional[int] = None,
) -> PosteriorTable:
    """Enumerate the prior support and return the normalised posterior p(z | D).

    Args:
        data: Validated dataset
        prior: Prior over selectors; its support must be enumerable
        threads: Worker count for candidate evaluation (output does not depend on it)
        max_p: Enumeration cap override

    Returns:
        PosteriorTable
    """
    if prior.p != data.p:
        raise DimensionMismatch(f"Prior is over {prior.p} features, dataset has p={data.p}")
    threads = BIP_THREADS if threads is None else max(1, int(threads))

    selectors = list(enumerate_support(prior, data.p, max_p=max_p))
    logger.info(
        f"Exact posterior: {len(selectors)} candidates ({prior.describe()}), "
        f"{data.n_envs} environments, {threads} worker(s)"
    )

    def ratio(z: FeatureSelector) -> LikelihoodRatioReport:
        return log_likelihood_ratio(data, z)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(ratio, selectors, chunksize=64))
    else:
        reports = [ratio(z) for z in selectors]

    degenerate = sum(1 for report in reports if report.rank_deficient_envs)
    if degenerate:
        logger.warning(f"{degenerate} of {len(selectors)} candidates have rank-deficient local fits")
    log_ratios = [report.log_ratio for report in reports]

    log_priors = [prior_log_mass(prior, z) for z in selectors]
    return _normalize(selectors, log_priors, log_ratios)


def posterior_mode(table: PosteriorTable) -> FeatureSelector:
    """argmax of the posterior; ties go to the first selector in enumeration order."""
    return table.entries[int(np.argmax(table.probabilities))].selector


def marginal_inclusion(table: PosteriorTable) -> np.ndarray:
    """Posterior probability that each feature is in the invariant set."""
    bits = np.array([entry.selector.bits for entry in table.entries], dtype=float)
    return table.probabilities @ bits


def select_by_threshold(marginals: np.ndarray, t: float) -> FeatureSelector:
    """Keep features whose marginal inclusion probability is strictly above t."""
    return FeatureSelector(tuple(int(m > t) for m in np.asarray(marginals)))


def write_posterior_csv(table: PosteriorTable, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_frame().to_csv(path, index=False, float_format="%.17g")
    except OSError as e:
        raise DataIOError(f"Could not write posterior table {path}: {e}") from e
    return path


def read_posterior_csv(path) -> PosteriorTable:
    """Load a table written by write_posterior_csv (log prior/ratio split is not stored)."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype={"z_bits": str})
        selectors = [FeatureSelector.from_string(bits) for bits in frame["z_bits"]]
        log_unnormalized = frame["log_unnormalized"].to_numpy(dtype=float)
    except (OSError, KeyError, ValueError) as e:
        raise DataIOError(f"Could not read posterior table {path}: {e}") from e
    return _normalize(selectors, np.zeros(len(selectors)), log_unnormalized)
