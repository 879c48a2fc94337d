"""Linear-Gaussian multi-environment data generator.

Variables are the p features plus the outcome y (node id p). A random
ordering of the p+1 nodes defines the factorisation; each node is Gaussian
given the nodes before it. Environment 0 is observational; every other
environment redraws the conditionals of a random fraction of the features.
The outcome's conditional is never intervened on, so the set of y's parents
is invariant by construction.
"""
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from ..data.dataset import FeatureSelector, MultiEnvDataset, from_blocks
from ..errors import ConfigInvalid, DataIOError, SingularCovariance
from ..inference.gaussian_mle import VARIANCE_FLOOR, LinearGaussianConditional
from ..utils.logging import logger


@dataclass(frozen=True)
class BoundRule:
    """Interventional coefficient bound as a function of m_e: scale * (m_e + offset) ** power."""

    offset: float
    scale: float = 1.0
    power: float = 1.0

    def __call__(self, m: float) -> float:
        return self.scale * (m + self.offset) ** self.power


@dataclass(frozen=True)
class SynthConfig:
    p: int = 3
    E: int = 5
    n: int = 200
    # p_act is drawn uniformly from these choices once per dataset
    p_act: tuple[float, ...] = (1.0,)
    lb: float = 0.5
    ub: float = 2.0
    sigma_min_sq: float = 0.1
    sigma_max_sq: float = 0.2
    p_star_min: int = 1
    p_star_max: int = 3
    # per interventional environment, each drawn uniformly from its range
    m_range: tuple[float, float] = (0.0, 1.0)
    lambda_min_range: tuple[float, float] = (0.1, 0.2)
    lambda_diff_range: tuple[float, float] = (0.1, 0.5)
    p_change_range: tuple[float, float] = (1.0, 1.0)
    rho_int_range: tuple[float, float] = (1.0, 1.0)
    lb_rule: BoundRule = BoundRule(0.01, 1.0, 2.0)
    ub_rule: BoundRule = BoundRule(0.5, 1.0, 2.0)
    seed: int = 0
    name: str = "custom"

    def with_strength(self, strength: float) -> "SynthConfig":
        """Fix the intervened fraction of features in every interventional environment."""
        return replace(self, rho_int_range=(strength, strength))

    def validate(self) -> "SynthConfig":
        if self.p < 1 or self.E < 1 or self.n < 1:
            raise ConfigInvalid(f"p, E and n must be positive, got p={self.p}, E={self.E}, n={self.n}")
        if not self.p_act or any(not (0.0 <= a <= 1.0) for a in self.p_act):
            raise ConfigInvalid(f"p_act choices must lie in [0, 1], got {self.p_act}")
        if not (0.0 <= self.lb <= self.ub):
            raise ConfigInvalid(f"Need 0 <= lb <= ub, got lb={self.lb}, ub={self.ub}")
        if not (0.0 < self.sigma_min_sq <= self.sigma_max_sq):
            raise ConfigInvalid(f"Need 0 < sigma_min_sq <= sigma_max_sq, got {self.sigma_min_sq}, {self.sigma_max_sq}")
        if not (0 <= self.p_star_min <= self.p_star_max <= self.p):
            raise ConfigInvalid(
                f"Need 0 <= p_star_min <= p_star_max <= p, got {self.p_star_min}, {self.p_star_max}, p={self.p}"
            )
        for label, (low, high) in (
            ("m_range", self.m_range),
            ("lambda_min_range", self.lambda_min_range),
            ("lambda_diff_range", self.lambda_diff_range),
            ("p_change_range", self.p_change_range),
            ("rho_int_range", self.rho_int_range),
        ):
            if low > high:
                raise ConfigInvalid(f"{label} has low > high: {(low, high)}")
        for label, (low, high) in (("p_change_range", self.p_change_range), ("rho_int_range", self.rho_int_range)):
            if low < 0.0 or high > 1.0:
                raise ConfigInvalid(f"{label} must lie in [0, 1], got {(low, high)}")
        if self.lambda_min_range[0] <= 0.0:
            raise ConfigInvalid(f"lambda_min_range must be positive, got {self.lambda_min_range}")
        return self


@dataclass(frozen=True)
class EnvParams:
    """Structural parameters of one environment; weights[child, parent]."""

    weights: np.ndarray
    intercepts: np.ndarray
    variances: np.ndarray


@dataclass(frozen=True)
class GroundTruth:
    z_star: FeatureSelector
    order: tuple[int, ...]
    env_params: tuple[EnvParams, ...]
    intervened: tuple[tuple[int, ...], ...]
    alternative_invariant: tuple[FeatureSelector, ...] = ()
    source: str = "custom"
    env_settings: tuple[dict, ...] = field(default=(), compare=False)

    @property
    def p(self) -> int:
        return len(self.z_star)

    @property
    def n_envs(self) -> int:
        return len(self.env_params)

    @property
    def permutation(self) -> tuple[int, ...]:
        """1-based node ids in factorisation order; p+1 is the outcome."""
        return tuple(node + 1 for node in self.order)

    @property
    def y_position(self) -> int:
        """1-based position of the outcome in the ordering."""
        return self.order.index(self.p) + 1

    def intervened_fraction(self, e: int) -> float:
        return len(self.intervened[e]) / self.p


def _signed_uniform(rng: np.random.Generator, low: float, high: float) -> float:
    magnitude = rng.uniform(low, high)
    return magnitude if rng.uniform() < 0.5 else -magnitude


def _sample_order(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    # resample until the outcome has between p_star_min and p_star_max predecessors
    while True:
        order = rng.permutation(cfg.p + 1)
        preds = int(np.flatnonzero(order == cfg.p)[0])
        if cfg.p_star_min <= preds <= cfg.p_star_max:
            return order


def _observational_params(cfg: SynthConfig, order: np.ndarray, p_act: float, rng: np.random.Generator) -> EnvParams:
    size = cfg.p + 1
    weights = np.zeros((size, size))
    intercepts = np.zeros(size)
    variances = np.zeros(size)
    for i, node in enumerate(order):
        intercepts[node] = rng.normal(0.0, 1.0)
        variances[node] = rng.uniform(cfg.sigma_min_sq, cfg.sigma_max_sq)
        for parent in order[:i]:
            if node == cfg.p or rng.uniform() < p_act:
                weights[node, parent] = _signed_uniform(rng, cfg.lb, cfg.ub)
    return EnvParams(weights, intercepts, variances)


def _intervened_count(rho: float, p: int) -> int:
    # tolerance keeps fractions such as 1/3 * 3 from rounding up
    return min(p, max(0, math.ceil(rho * p - 1e-9)))


def _interventional_params(
    cfg: SynthConfig,
    order: np.ndarray,
    observational: EnvParams,
    p_act: float,
    rng: np.random.Generator,
) -> tuple[EnvParams, tuple[int, ...], dict]:
    m_e = rng.uniform(*cfg.m_range)
    lambda_min = rng.uniform(*cfg.lambda_min_range)
    lambda_diff = rng.uniform(*cfg.lambda_diff_range)
    p_change = rng.uniform(*cfg.p_change_range)
    rho = rng.uniform(*cfg.rho_int_range)
    lb_e, ub_e = cfg.lb_rule(m_e), cfg.ub_rule(m_e)
    if lb_e > ub_e:
        lb_e, ub_e = ub_e, lb_e

    count = _intervened_count(rho, cfg.p)
    intervened = tuple(sorted(int(j) for j in rng.choice(cfg.p, size=count, replace=False)))

    weights = observational.weights.copy()
    intercepts = observational.intercepts.copy()
    variances = observational.variances.copy()
    position = {int(node): i for i, node in enumerate(order)}
    for node in intervened:
        magnitude = abs(rng.normal(m_e, 1.0))
        intercepts[node] = magnitude if rng.uniform() < 0.5 else -magnitude
        lam = rng.uniform(lambda_min, lambda_min + lambda_diff)
        variances[node] = lam ** 2 * observational.variances[node]
        for parent in order[: position[node]]:
            if rng.uniform() < p_change:
                continue
            if rng.uniform() < p_act:
                weights[node, parent] = _signed_uniform(rng, lb_e, ub_e)
            else:
                weights[node, parent] = 0.0

    settings = {
        "m": m_e,
        "lambda_min": lambda_min,
        "lambda_diff": lambda_diff,
        "p_change": p_change,
        "rho_int": rho,
        "lb": lb_e,
        "ub": ub_e,
    }
    return EnvParams(weights, intercepts, variances), intervened, settings


def sample_environment(params: EnvParams, order: Sequence[int], n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Ancestral sampling of n rows; returns (X, y) with y the last node."""
    size = len(params.intercepts)
    values = np.zeros((n, size))
    for node in order:
        noise = rng.standard_normal(n) * math.sqrt(params.variances[node])
        values[:, node] = values @ params.weights[node] + params.intercepts[node] + noise
    return values[:, : size - 1], values[:, size - 1]


def generate(cfg: SynthConfig) -> tuple[MultiEnvDataset, GroundTruth]:
    """Draw a structural model and n rows from each of E environments.

    Args:
        cfg: Generator configuration

    Returns:
        (dataset, ground truth); identical for identical configurations
    """
    cfg.validate()
    root = np.random.SeedSequence(cfg.seed)
    structure_seq, observational_seq, *env_seqs = root.spawn(2 + cfg.E)

    structure_rng = np.random.default_rng(structure_seq)
    order = _sample_order(cfg, structure_rng)
    p_act = float(structure_rng.choice(np.asarray(cfg.p_act, dtype=float)))

    observational = _observational_params(cfg, order, p_act, np.random.default_rng(observational_seq))
    params = [observational]
    intervened: list[tuple[int, ...]] = [()]
    settings: list[dict] = [{"p_act": p_act}]

    sample_seqs = []
    for e, env_seq in enumerate(env_seqs):
        param_seq, sample_seq = env_seq.spawn(2)
        sample_seqs.append(sample_seq)
        if e == 0:
            continue
        env_params, env_intervened, env_settings = _interventional_params(
            cfg, order, observational, p_act, np.random.default_rng(param_seq)
        )
        params.append(env_params)
        intervened.append(env_intervened)
        settings.append(env_settings)

    blocks = [sample_environment(env_params, order, cfg.n, np.random.default_rng(seq)) for env_params, seq in zip(params, sample_seqs)]
    dataset = from_blocks(blocks)

    parents = np.flatnonzero(observational.weights[cfg.p, : cfg.p] != 0.0)
    truth = GroundTruth(
        z_star=FeatureSelector.from_indices(parents, cfg.p),
        order=tuple(int(node) for node in order),
        env_params=tuple(params),
        intervened=tuple(intervened),
        source=cfg.name,
        env_settings=tuple(settings),
    )
    logger.debug(f"Generated {cfg.name}: p={cfg.p}, E={cfg.E}, n={cfg.n}, z*={truth.z_star}")
    return dataset, truth


def joint_moments(gt: GroundTruth, e: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of (x_1..x_p, y) under environment e."""
    params = gt.env_params[e]
    size = len(params.intercepts)
    A = np.eye(size) - params.weights
    A_inv = linalg.solve_triangular(A[np.ix_(gt.order, gt.order)], np.eye(size), lower=True)
    # undo the ordering permutation
    inv_order = np.argsort(gt.order)
    A_inv = A_inv[np.ix_(inv_order, inv_order)]
    mean = A_inv @ params.intercepts
    cov = A_inv @ np.diag(params.variances) @ A_inv.T
    return mean, cov


def true_conditional_params(gt: GroundTruth, e: int, z: FeatureSelector) -> LinearGaussianConditional:
    """Exact Gaussian conditional of y given x^z under environment e (Schur complement of the joint)."""
    mean, cov = joint_moments(gt, e)
    y = gt.p
    S = list(z.indices)
    if not S:
        return LinearGaussianConditional(z, np.zeros(0), float(mean[y]), max(float(cov[y, y]), VARIANCE_FLOOR))

    cov_SS = cov[np.ix_(S, S)]
    cov_Sy = cov[S, y]
    try:
        coef = linalg.solve(cov_SS, cov_Sy, assume_a="pos")
    except linalg.LinAlgError:
        logger.warning(f"Singular feature covariance for z={z} in environment {e}; using least squares")
        coef = linalg.lstsq(cov_SS, cov_Sy)[0]
    variance = float(cov[y, y] - cov_Sy @ coef)
    if not math.isfinite(variance):
        raise SingularCovariance(f"Conditional variance is not finite for z={z} in environment {e}")
    intercept = float(mean[y] - mean[S] @ coef)
    return LinearGaussianConditional(z, np.asarray(coef, dtype=float), intercept, max(variance, VARIANCE_FLOOR))


def ground_truth_to_dict(gt: GroundTruth) -> dict:
    return {
        "z_star": str(gt.z_star),
        "permutation": list(gt.permutation),
        "intervened_sets": [[j + 1 for j in env] for env in gt.intervened],
        "alternative_invariant": [str(z) for z in gt.alternative_invariant],
        "source": gt.source,
        "env_params": [
            {
                "weights": params.weights.tolist(),
                "intercepts": params.intercepts.tolist(),
                "variances": params.variances.tolist(),
            }
            for params in gt.env_params
        ],
        "env_settings": list(gt.env_settings),
    }


def ground_truth_from_dict(document: dict) -> GroundTruth:
    try:
        return GroundTruth(
            z_star=FeatureSelector.from_string(document["z_star"]),
            order=tuple(int(node) - 1 for node in document["permutation"]),
            env_params=tuple(
                EnvParams(
                    np.asarray(item["weights"], dtype=float),
                    np.asarray(item["intercepts"], dtype=float),
                    np.asarray(item["variances"], dtype=float),
                )
                for item in document["env_params"]
            ),
            intervened=tuple(tuple(j - 1 for j in env) for env in document["intervened_sets"]),
            alternative_invariant=tuple(FeatureSelector.from_string(z) for z in document.get("alternative_invariant", [])),
            source=document.get("source", "custom"),
            env_settings=tuple(document.get("env_settings", [])),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataIOError(f"Malformed ground-truth document: {e}") from e


def write_ground_truth(gt: GroundTruth, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(ground_truth_to_dict(gt), indent=2))
    except OSError as e:
        raise DataIOError(f"Could not write ground truth {path}: {e}") from e
    return path


def read_ground_truth(path) -> GroundTruth:
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataIOError(f"Could not read ground truth {path}: {e}") from e
    return ground_truth_from_dict(document)
