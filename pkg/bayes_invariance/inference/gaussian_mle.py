"""Maximum-likelihood linear-Gaussian conditionals y | x^z.

Fits always carry an intercept. The variance is the MLE (denominator n),
clamped to VARIANCE_FLOOR. Rank-deficient designs are solved by minimum-norm
least squares on centred data and flagged on the fitted model.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.stats import norm

from ..data.dataset import FeatureSelector, MultiEnvDataset
from ..errors import DimensionMismatch, ShapeMismatch
from ..utils.logging import logger

VARIANCE_FLOOR = 1e-12

# singular values below RANK_RTOL * largest are treated as zero
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class LinearGaussianConditional:
    """N(y | coef^T x^z + intercept, variance)."""

    selector: Optional[FeatureSelector]
    coef: np.ndarray
    intercept: float
    variance: float
    n: int = 0
    rank_deficient: bool = False

    @property
    def k(self) -> int:
        return len(self.coef)

    def mean(self, X_sub: np.ndarray) -> np.ndarray:
        X_sub = np.asarray(X_sub, dtype=float)
        if X_sub.ndim == 1:
            X_sub = X_sub.reshape(1, -1)
        if X_sub.shape[1] != self.k:
            raise DimensionMismatch(f"Model has {self.k} coefficients, got {X_sub.shape[1]} columns")
        return X_sub @ self.coef + self.intercept


def fit_mle(X_sub: np.ndarray, y: np.ndarray, selector: Optional[FeatureSelector] = None) -> LinearGaussianConditional:
    """Fit y ~ N(coef^T x + intercept, variance) by maximum likelihood.

    Args:
        X_sub: n x k design (k may be 0 for an intercept-only model)
        y: length-n outcome
        selector: selector the columns were extracted with, kept on the model

    Returns:
        LinearGaussianConditional
    """
    X_sub = np.asarray(X_sub, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X_sub.ndim != 2 or X_sub.shape[0] != len(y):
        raise ShapeMismatch(f"Design of shape {X_sub.shape} does not match {len(y)} outcomes")
    n, k = X_sub.shape
    if n < 1:
        raise ShapeMismatch("Cannot fit a model on zero rows")

    y_mean = y.mean()
    rank_deficient = False
    if k == 0:
        coef = np.zeros(0)
        intercept = y_mean
    else:
        x_mean = X_sub.mean(axis=0)
        Xc = X_sub - x_mean
        coef, _, rank, _ = linalg.lstsq(Xc, y - y_mean, cond=RANK_RTOL, lapack_driver="gelsd")
        rank_deficient = rank < k
        if rank_deficient:
            logger.debug(f"Rank-deficient design (rank {rank} < {k}, n={n}); using minimum-norm solution")
        intercept = y_mean - x_mean @ coef

    residuals = y - (X_sub @ coef + intercept)
    variance = max(float(np.mean(residuals ** 2)), VARIANCE_FLOOR)
    coef = np.asarray(coef, dtype=float)
    coef.setflags(write=False)
    return LinearGaussianConditional(selector, coef, float(intercept), variance, n=n, rank_deficient=rank_deficient)


def log_density(model: LinearGaussianConditional, x_row, y):
    """log N(y | coef^T x + intercept, variance) for one row, or elementwise for stacked rows."""
    scalar = np.ndim(y) == 0
    mu = model.mean(x_row)
    values = norm.logpdf(np.ravel(y), loc=mu, scale=np.sqrt(model.variance))
    return float(values[0]) if scalar else values


def log_likelihood(model: LinearGaussianConditional, X_sub: np.ndarray, y: np.ndarray) -> float:
    """Sum of log-densities over the rows of X_sub."""
    return float(np.sum(log_density(model, X_sub, np.asarray(y, dtype=float).ravel())))


def fit_local_conditionals(data: MultiEnvDataset, z: FeatureSelector) -> list[LinearGaussianConditional]:
    """One MLE fit of y | x^z per environment."""
    models = [fit_mle(z.select(block.X), block.y, selector=z) for block in data.environments]
    flagged = [e for e, m in enumerate(models) if m.rank_deficient]
    if flagged:
        logger.debug(f"Selector {z}: rank-deficient local fits in environments {flagged}")
    return models


def fit_pooled_conditional(data: MultiEnvDataset, z: FeatureSelector) -> LinearGaussianConditional:
    """MLE fit of y | x^z on all environments stacked together."""
    X, y = data.pooled()
    return fit_mle(z.select(X), y, selector=z)
