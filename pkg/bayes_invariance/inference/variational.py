"""Variational inference over feature selectors (VI-BIP).

The variational family is a product of Bernoullis q_phi(z) = Π_j Bern(sigmoid(phi_j)).
The ELBO integrand for a sampled selector is

    f(z) = log p(z) + log Λ(z) - log q_phi(z)

and its gradient is estimated with the U2G pair estimator. Selectors outside
the prior support get a fixed penalty objective instead of -inf.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit, log_expit, logit

from ..config import BIP_FIT_CACHE_SIZE
from ..data.dataset import FeatureSelector, MultiEnvDataset
from ..data.prior import OUTSIDE_SUPPORT, Prior, PriorKind, prior_log_mass
from ..errors import ConfigInvalid, DimensionMismatch, NonFiniteGradient, PriorNotUniform
from ..utils.common import LRUCache
from ..utils.logging import logger
from .exact import log_likelihood_ratio

# Objective over 0/1 arrays of length p
Objective = Callable[[np.ndarray], float]


class LRMode(str, Enum):
    TRIANGULAR = "triangular"
    TRIANGULAR2 = "triangular2"


@dataclass(frozen=True)
class VIConfig:
    """Optimizer settings for run_vi.

    Defaults follow the low-dimensional comparison setting: M=20 samples,
    triangular cycle between 1 and 10 with 500 steps up, 2000 iterations.
    """

    T: int = 2000
    M: int = 20
    lr_base: float = 1.0
    lr_max: float = 10.0
    cycle_half: int = 500
    lr_mode: LRMode = LRMode.TRIANGULAR
    penalty_value: float = -1.0
    kl_analytic_prob: float = 0.5
    phi_init: Optional[tuple[float, ...]] = None
    seed: int = 0
    elbo_every: int = 50
    elbo_samples: Optional[int] = None
    phi_clip: float = 15.0
    snapshot_every: int = 0
    threads: int = 1

    def __post_init__(self):
        try:
            object.__setattr__(self, "lr_mode", LRMode(self.lr_mode))
        except ValueError as e:
            raise ConfigInvalid(f"lr_mode must be one of {[m.value for m in LRMode]}, got {self.lr_mode!r}") from e
        if self.phi_init is not None:
            object.__setattr__(self, "phi_init", tuple(float(v) for v in self.phi_init))
        if self.T < 0:
            raise ConfigInvalid(f"T must be >= 0, got {self.T}")
        if self.M < 1:
            raise ConfigInvalid(f"M must be >= 1, got {self.M}")
        if not (0 < self.lr_base <= self.lr_max):
            raise ConfigInvalid(f"Need 0 < lr_base <= lr_max, got {self.lr_base}, {self.lr_max}")
        if self.cycle_half < 1:
            raise ConfigInvalid(f"cycle_half must be >= 1, got {self.cycle_half}")
        if not (0.0 <= self.kl_analytic_prob <= 1.0):
            raise ConfigInvalid(f"kl_analytic_prob must be in [0, 1], got {self.kl_analytic_prob}")
        if self.elbo_every < 1:
            raise ConfigInvalid(f"elbo_every must be >= 1, got {self.elbo_every}")
        if self.phi_clip <= 0:
            raise ConfigInvalid(f"phi_clip must be positive, got {self.phi_clip}")
        if self.threads < 1:
            raise ConfigInvalid(f"threads must be >= 1, got {self.threads}")


@dataclass
class VariationalState:
    phi: np.ndarray
    step: int
    best_phi: np.ndarray
    best_elbo: float
    best_step: int = 0


@dataclass(frozen=True)
class ELBOEstimate:
    value: float
    n_samples: int
    std_error: float = 0.0


def log_q(phi: np.ndarray, z) -> float:
    """log q_phi(z) for the product-Bernoulli family."""
    z = np.asarray(z, dtype=float)
    return float(np.sum(z * log_expit(phi) + (1.0 - z) * log_expit(-phi)))


def variational_probability(phi: np.ndarray, z: FeatureSelector) -> float:
    """q_phi(z)"""
    return math.exp(log_q(np.asarray(phi, dtype=float), z.bits))


class InvarianceObjective:
    """ELBO integrand for one dataset and prior, with likelihood ratios memoised per selector."""

    def __init__(self, data: MultiEnvDataset, prior: Prior, penalty_value: float = -1.0, cache_size: Optional[int] = None):
        if prior.p != data.p:
            raise DimensionMismatch(f"Prior is over {prior.p} features, dataset has p={data.p}")
        self.data = data
        self.prior = prior
        self.penalty_value = float(penalty_value)
        self.cache = LRUCache(BIP_FIT_CACHE_SIZE if cache_size is None else cache_size)

    def log_ratio(self, bits) -> float:
        key = tuple(int(b) for b in bits)
        return self.cache.get_or_compute(key, lambda: log_likelihood_ratio(self.data, FeatureSelector(key)).log_ratio)

    def full(self, bits, phi: np.ndarray) -> float:
        """log p(z) + log Λ(z) - log q_phi(z), or the penalty outside the prior support."""
        log_prior = prior_log_mass(self.prior, FeatureSelector(tuple(int(b) for b in bits)))
        if log_prior is OUTSIDE_SUPPORT:
            return self.penalty_value
        return log_prior + self.log_ratio(bits) - log_q(phi, bits)

    def reconstruction(self, bits) -> float:
        """log Λ(z), or the penalty outside the prior support."""
        if not self.prior.in_support(FeatureSelector(tuple(int(b) for b in bits))):
            return self.penalty_value
        return self.log_ratio(bits)


def stochastic_objective(
    data: MultiEnvDataset,
    prior: Prior,
    z: FeatureSelector,
    phi,
    penalty_value: float = -1.0,
    objective: Optional[InvarianceObjective] = None,
) -> float:
    """The ELBO integrand f(z) at variational parameters phi."""
    objective = objective or InvarianceObjective(data, prior, penalty_value)
    phi = np.asarray(phi, dtype=float)
    if len(phi) != data.p or len(z) != data.p:
        raise DimensionMismatch(f"Expected length {data.p}, got phi {len(phi)} and z {len(z)}")
    return objective.full(z.bits, phi)


def _u2g_from_uniform(f: Objective, phi: np.ndarray, u: np.ndarray) -> np.ndarray:
    sigma = expit(phi)
    # strict inequalities: u exactly on a boundary sets neither indicator
    z1 = (u > 1.0 - sigma).astype(int)
    z2 = (u < sigma).astype(int)
    diff = z1 - z2
    if not diff.any():
        return np.zeros_like(phi)
    return 0.5 * expit(np.abs(phi)) * (f(z1) - f(z2)) * diff


def u2g_gradient(f: Objective, phi, rng: np.random.Generator) -> np.ndarray:
    """Single-sample unbiased estimate of ∇_phi E_{q_phi}[f(z)] from a correlated pair (z1, z2).

    Args:
        f: Objective evaluated on 0/1 arrays
        phi: Logits, length p
        rng: Source of the shared uniforms

    Returns:
        Gradient estimate, length p
    """
    phi = np.asarray(phi, dtype=float)
    return _u2g_from_uniform(f, phi, rng.uniform(size=phi.shape))


def kl_gradient_analytic(phi, prior: Optional[Prior] = None) -> np.ndarray:
    """Closed-form ∇_phi KL(q_phi || p) for a prior uniform on its support.

    [log σ - log(1 - σ)] σ (1 - σ) with σ = sigmoid(phi); the log-odds term is phi itself.
    """
    if prior is not None and not prior.is_uniform:
        raise PriorNotUniform(f"Closed-form KL gradient needs a uniform prior, got {prior.kind.value}")
    phi = np.asarray(phi, dtype=float)
    sigma = expit(phi)
    return phi * sigma * (1.0 - sigma)


def cyclical_lr(step: int, cfg: VIConfig) -> float:
    """Triangular cyclical learning rate; triangular2 halves the amplitude every cycle."""
    period = 2 * cfg.cycle_half
    cycle = step // period + 1
    x = abs((step % period) / cfg.cycle_half - 1.0)
    amplitude = cfg.lr_max - cfg.lr_base
    if cfg.lr_mode == LRMode.TRIANGULAR2:
        amplitude /= 2.0 ** (cycle - 1)
    return cfg.lr_base + amplitude * max(0.0, 1.0 - x)


def estimate_elbo(
    data: MultiEnvDataset,
    prior: Prior,
    phi,
    n_samples: int,
    rng: np.random.Generator,
    objective: Optional[InvarianceObjective] = None,
    penalty_value: float = -1.0,
) -> ELBOEstimate:
    """Monte Carlo ELBO (up to the data constant) from n_samples draws of z ~ q_phi."""
    if n_samples < 1:
        raise ConfigInvalid(f"n_samples must be >= 1, got {n_samples}")
    objective = objective or InvarianceObjective(data, prior, penalty_value)
    phi = np.asarray(phi, dtype=float)
    draws = rng.uniform(size=(n_samples, len(phi))) < expit(phi)
    values = np.array([objective.full(z, phi) for z in draws.astype(int)])
    std_error = float(values.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return ELBOEstimate(float(values.mean()), n_samples, std_error)


def variational_mode(phi, t: float = 0.5) -> FeatureSelector:
    """z_j = 1[sigmoid(phi_j) > t]"""
    if not (0.0 < t < 1.0):
        raise ConfigInvalid(f"Threshold must be in (0, 1), got {t}")
    return FeatureSelector(tuple(int(s > t) for s in expit(np.asarray(phi, dtype=float))))


def default_phi_init(prior: Prior) -> np.ndarray:
    """Uninformative start: sigmoid(phi_j) = min(0.9 p_max / p, 0.4) under a cardinality cap, else 1/2."""
    if prior.kind == PriorKind.UNIFORM_MAX_CARDINALITY:
        sigma0 = min(prior.p_max / prior.p * 0.9, 0.4)
        sigma0 = max(sigma0, 1e-6)
        return np.full(prior.p, float(logit(sigma0)))
    return np.zeros(prior.p)


def run_vi(
    data: MultiEnvDataset,
    prior: Prior,
    cfg: VIConfig,
    objective: Optional[InvarianceObjective] = None,
    log_sink: Optional[Callable[[dict], None]] = None,
) -> VariationalState:
    """Maximise the ELBO by stochastic gradient ascent on phi.

    Each step averages M U2G estimates. With probability kl_analytic_prob the
    KL part uses its closed-form gradient and only log Λ is estimated
    stochastically. The ELBO is estimated every elbo_every steps and the
    parameters with the best estimate are kept as best_phi.

    Args:
        data: Validated dataset
        prior: Prior over selectors
        cfg: Optimizer settings
        objective: Shared objective (and ratio cache), built if omitted
        log_sink: Receives one record per step: step, lr, and at checkpoints
            elbo_estimate and best_elbo, optionally phi_snapshot

    Returns:
        VariationalState with best_phi selected
    """
    objective = objective or InvarianceObjective(data, prior, cfg.penalty_value)
    rng = np.random.default_rng(cfg.seed)
    p = data.p

    phi = np.array(cfg.phi_init, dtype=float) if cfg.phi_init is not None else default_phi_init(prior)
    if len(phi) != p:
        raise DimensionMismatch(f"phi_init has length {len(phi)}, dataset has p={p}")
    phi = np.clip(phi, -cfg.phi_clip, cfg.phi_clip)

    analytic_allowed = prior.is_uniform
    if cfg.kl_analytic_prob > 0 and not analytic_allowed:
        logger.warning("Prior is not uniform on its support; using stochastic KL gradients only")

    elbo_samples = cfg.elbo_samples or cfg.M
    state = VariationalState(phi=phi.copy(), step=0, best_phi=phi.copy(), best_elbo=-math.inf)

    def checkpoint(step: int) -> float:
        estimate = estimate_elbo(data, prior, state.phi, elbo_samples, rng, objective=objective)
        if estimate.value > state.best_elbo:
            state.best_elbo = estimate.value
            state.best_phi = state.phi.copy()
            state.best_step = step
        return estimate.value

    elbo0 = checkpoint(0)
    if log_sink:
        log_sink({"step": 0, "lr": cyclical_lr(0, cfg), "elbo_estimate": elbo0, "best_elbo": state.best_elbo})
    logger.info(f"VI start: p={p}, T={cfg.T}, M={cfg.M}, initial ELBO {elbo0:.3f}")

    pool = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    try:
        for t in range(cfg.T):
            lr = cyclical_lr(t, cfg)
            use_analytic = rng.uniform() < cfg.kl_analytic_prob and analytic_allowed
            uniforms = rng.uniform(size=(cfg.M, p))

            current = state.phi
            if use_analytic:
                f = objective.reconstruction
            else:
                def f(bits, current=current):
                    return objective.full(bits, current)

            if pool is not None:
                samples = list(pool.map(lambda u: _u2g_from_uniform(f, current, u), uniforms))
            else:
                samples = [_u2g_from_uniform(f, current, u) for u in uniforms]
            grad = np.mean(samples, axis=0)
            if use_analytic:
                grad = grad - kl_gradient_analytic(current)

            if not np.all(np.isfinite(grad)):
                raise NonFiniteGradient(f"Non-finite gradient at step {t}", last_good_phi=current.copy(), step=t)

            state.phi = np.clip(current + lr * grad, -cfg.phi_clip, cfg.phi_clip)
            state.step = t + 1

            record = {"step": t + 1, "lr": lr}
            if (t + 1) % cfg.elbo_every == 0 or t + 1 == cfg.T:
                record["elbo_estimate"] = checkpoint(t + 1)
                record["best_elbo"] = state.best_elbo
                logger.debug(f"VI step {t + 1}: ELBO {record['elbo_estimate']:.3f} (best {state.best_elbo:.3f})")
            if cfg.snapshot_every and (t + 1) % cfg.snapshot_every == 0:
                record["phi_snapshot"] = state.phi.tolist()
            if log_sink:
                log_sink(record)
    finally:
        if pool is not None:
            pool.shutdown()

    logger.info(
        f"VI done: best ELBO {state.best_elbo:.3f} at step {state.best_step}, "
        f"{len(objective.cache)} cached selectors"
    )
    return state


def run_vi_multi_start(
    data: MultiEnvDataset,
    prior: Prior,
    cfg: VIConfig,
    inits: Sequence[Sequence[float]],
    log_sink: Optional[Callable[[dict], None]] = None,
) -> VariationalState:
    """Run VI from several initial logit vectors and keep the run with the best ELBO."""
    if not inits:
        raise ConfigInvalid("At least one initialisation is required")
    objective = InvarianceObjective(data, prior, cfg.penalty_value)
    best = None
    for i, init in enumerate(inits):
        state = run_vi(data, prior, replace(cfg, phi_init=tuple(init)), objective=objective, log_sink=log_sink)
        logger.info(f"VI start {i}: best ELBO {state.best_elbo:.3f}")
        if best is None or state.best_elbo > best.best_elbo:
            best = state
    return best
