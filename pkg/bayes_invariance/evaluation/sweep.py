"""Grid runner: simulate, fit and score over (n, E, strength) cells.

Each replicate's dataset seed is derived from (seed, n, E, strength,
replicate), so every method sees the same data and results do not depend on
how replicates are scheduled across workers.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from ..data.dataset import FeatureSelector, MultiEnvDataset
from ..data.prior import parse_prior_spec
from ..errors import ConfigInvalid, DataIOError
from ..inference.exact import exact_posterior, posterior_mode
from ..inference.variational import VIConfig, run_vi, variational_mode, variational_probability
from ..simulation.presets import simulate_preset
from ..simulation.synthetic import GroundTruth
from ..utils.common import derive_seed
from ..utils.logging import logger
from .baselines import oracle_regression, pooled_regression
from .metrics import EvalReport, mu_min_and_R

METHODS = ("exact", "vi", "oracle-regression", "pooled-regression")

SWEEP_COLUMNS = [
    "p",
    "n",
    "E",
    "strength",
    "method",
    "exact_rate",
    "coverage",
    "mass_at_truth",
    "replicates",
    "failures",
    "status",
]

THEORY_COLUMNS = ["p", "n", "E", "strength", "mu_min_mean", "mu_min_se", "R", "replicates"]


@dataclass(frozen=True)
class SweepConfig:
    preset: str = "appendix-c1-p3"
    p: Optional[int] = None
    n_values: tuple[int, ...] = (200,)
    E_values: tuple[int, ...] = (5,)
    strengths: tuple[float, ...] = (1.0,)
    replicates: int = 10
    methods: tuple[str, ...] = ("exact",)
    prior: str = "uniform"
    p_max: Optional[int] = None
    threshold: float = 0.5
    vi: VIConfig = field(default_factory=VIConfig)
    theory: bool = False
    mc_samples: int = 10_000
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not self.methods:
            raise ConfigInvalid("Sweep needs at least one method")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigInvalid(f"Unknown methods {unknown}; choose from {', '.join(METHODS)}")
        if self.replicates < 1:
            raise ConfigInvalid(f"replicates must be positive, got {self.replicates}")
        if not self.n_values or not self.E_values or not self.strengths:
            raise ConfigInvalid("n_values, E_values and strengths must be non-empty")
        if not (0.0 < self.threshold < 1.0):
            raise ConfigInvalid(f"threshold must be in (0, 1), got {self.threshold}")


@dataclass
class ReplicateResult:
    z_star: FeatureSelector
    selections: dict[str, FeatureSelector] = field(default_factory=dict)
    mass_at_truth: dict[str, float] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    mu_min: Optional[float] = None
    R: Optional[float] = None


@dataclass
class SweepResult:
    rows: pd.DataFrame
    theory: Optional[pd.DataFrame] = None


def _fit_method(method: str, data: MultiEnvDataset, truth: GroundTruth, cfg: SweepConfig, seed: int):
    """Return (selection, posterior mass at truth or nan)."""
    if method == "oracle-regression":
        return oracle_regression(data, truth.z_star), math.nan
    if method == "pooled-regression":
        return pooled_regression(data), math.nan

    prior = parse_prior_spec(cfg.prior, data.p, cfg.p_max)
    if method == "exact":
        table = exact_posterior(data, prior, threads=1)
        entry = table.lookup(truth.z_star)
        return posterior_mode(table), (entry.posterior if entry else 0.0)

    state = run_vi(data, prior, replace(cfg.vi, seed=seed, threads=1))
    return variational_mode(state.best_phi, cfg.threshold), variational_probability(state.best_phi, truth.z_star)


def run_replicate(cfg: SweepConfig, n: int, E: int, strength: float, replicate: int) -> ReplicateResult:
    seed = derive_seed(cfg.seed, n, E, int(round(strength * 1000)), replicate)
    data, truth = simulate_preset(cfg.preset, p=cfg.p, E=E, n=n, strength=strength, seed=seed)
    result = ReplicateResult(z_star=truth.z_star)

    for method in cfg.methods:
        try:
            z_hat, mass = _fit_method(method, data, truth, cfg, seed)
        except Exception as e:
            logger.exception(f"Replicate {replicate} (n={n}, E={E}, strength={strength}) failed for {method}: {e}")
            result.errors[method] = str(e)
            continue
        result.selections[method] = z_hat
        result.mass_at_truth[method] = mass

    if cfg.theory:
        try:
            prior = parse_prior_spec(cfg.prior, truth.p, cfg.p_max)
            diagnostics = mu_min_and_R(truth, prior, n_samples=cfg.mc_samples, seed=seed)
            result.mu_min, result.R = diagnostics.mu_min, diagnostics.R
        except Exception as e:
            logger.exception(f"Theory diagnostics failed for replicate {replicate}: {e}")
    return result


def _cell_rows(cfg: SweepConfig, p: int, n: int, E: int, strength: float, results: list[ReplicateResult]) -> list[dict]:
    rows = []
    for method in cfg.methods:
        ok = [r for r in results if method in r.selections]
        failures = len(results) - len(ok)
        row = {"p": p, "n": n, "E": E, "strength": strength, "method": method, "replicates": len(ok), "failures": failures}
        if ok:
            report = EvalReport.from_replicates([(r.selections[method], r.z_star) for r in ok])
            row["exact_rate"] = report.exact_discovery
            row["coverage"] = report.coverage
            masses = [r.mass_at_truth[method] for r in ok]
            row["mass_at_truth"] = math.nan if all(math.isnan(m) for m in masses) else float(np.nanmean(masses))
        else:
            row["exact_rate"] = row["coverage"] = row["mass_at_truth"] = math.nan
        row["status"] = "ok" if failures == 0 else ("failed" if not ok else "partial")
        rows.append(row)
    return rows


def _theory_row(p: int, n: int, E: int, strength: float, results: list[ReplicateResult]) -> dict:
    values = np.array([r.mu_min for r in results if r.mu_min is not None and math.isfinite(r.mu_min)])
    R_values = [r.R for r in results if r.R is not None]
    se = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else math.nan
    return {
        "p": p,
        "n": n,
        "E": E,
        "strength": strength,
        "mu_min_mean": float(np.mean(values)) if len(values) else math.nan,
        "mu_min_se": se,
        "R": R_values[0] if R_values else math.nan,
        "replicates": len(values),
    }


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """Run every (n, E, strength) cell of the grid and aggregate per method.

    Failed fits are counted per method; a cell with failures is marked
    'partial' (or 'failed' when nothing succeeded) and the sweep continues.
    """
    cells = [(n, E, s) for n in cfg.n_values for E in cfg.E_values for s in cfg.strengths]
    tasks = [(n, E, s, r) for n, E, s in cells for r in range(cfg.replicates)]
    logger.info(f"Sweep '{cfg.preset}': {len(cells)} cells x {cfg.replicates} replicates, methods {list(cfg.methods)}")

    def work(task):
        return run_replicate(cfg, *task)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(task) for task in tasks]

    by_cell: dict[tuple, list[ReplicateResult]] = {}
    for (n, E, s, _), result in zip(tasks, results):
        by_cell.setdefault((n, E, s), []).append(result)

    rows, theory_rows = [], []
    for (n, E, s), cell_results in by_cell.items():
        p = len(cell_results[0].z_star)
        rows.extend(_cell_rows(cfg, p, n, E, s, cell_results))
        if cfg.theory:
            theory_rows.append(_theory_row(p, n, E, s, cell_results))

    frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    theory = pd.DataFrame(theory_rows, columns=THEORY_COLUMNS) if cfg.theory else None
    return SweepResult(frame, theory)


def write_sweep_csv(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format="%.17g")
    except OSError as e:
        raise DataIOError(f"Could not write sweep results {path}: {e}") from e
    return path
