"""Significance-thresholded pooled regression baselines.

Both baselines stack every environment, fit ordinary least squares with an
intercept and keep the features whose coefficient is significant under a
two-sided t-test. The oracle variant only regresses on the true invariant
features; the pooled variant regresses on all of them.
"""
import numpy as np
import statsmodels.api as sm

from ..data.dataset import FeatureSelector, MultiEnvDataset
from ..errors import DimensionMismatch
from ..utils.logging import logger

ALPHA = 0.05


def significant_features(data: MultiEnvDataset, candidates: FeatureSelector, alpha: float = ALPHA) -> FeatureSelector:
    """Features of `candidates` with pooled OLS coefficient p-value below alpha."""
    if len(candidates) != data.p:
        raise DimensionMismatch(f"Selector has {len(candidates)} entries, dataset has p={data.p}")
    indices = candidates.indices
    if not indices:
        return FeatureSelector.empty(data.p)

    X, y = data.pooled()
    dof = len(y) - len(indices) - 1
    if dof <= 0:
        logger.warning(f"OLS on {len(indices)} features with {len(y)} rows has no residual degrees of freedom; selecting none")
        return FeatureSelector.empty(data.p)

    design = sm.add_constant(candidates.select(X), has_constant="add")
    result = sm.OLS(y, design).fit()
    pvalues = np.asarray(result.pvalues)[1:]
    kept = [j for j, pv in zip(indices, pvalues) if np.isfinite(pv) and pv < alpha]
    return FeatureSelector.from_indices(kept, data.p)


def oracle_regression(data: MultiEnvDataset, z_star: FeatureSelector, alpha: float = ALPHA) -> FeatureSelector:
    return significant_features(data, z_star, alpha)


def pooled_regression(data: MultiEnvDataset, alpha: float = ALPHA) -> FeatureSelector:
    return significant_features(data, FeatureSelector.full(data.p), alpha)
