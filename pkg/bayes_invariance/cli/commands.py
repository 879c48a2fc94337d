"""Command implementations behind the CLI verbs and the MCP tools.

Commands raise BIPError subclasses; main.py turns them into exit codes.
Human-readable summaries go to stdout, progress to the logger (stderr).
"""
import json
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from ..config import BIP_OUTPUT_DIR, SELECTION_THRESHOLDS
from ..data.dataset import FeatureSelector, read_dataset_csv, write_dataset_csv
from ..data.prior import parse_prior_spec
from ..errors import ConfigError, DataIOError, NonFiniteGradient
from ..evaluation.metrics import EvalReport, mu_min_and_R, tv_to_dirac, write_json
from ..evaluation.sweep import run_sweep, write_sweep_csv
from ..inference.exact import (
    exact_posterior,
    marginal_inclusion,
    posterior_mode,
    read_posterior_csv,
    select_by_threshold,
    write_posterior_csv,
)
from ..inference.variational import default_phi_init, run_vi, run_vi_multi_start, variational_mode
from ..simulation.presets import UQ_PRESETS, get_preset, simulate_preset
from ..simulation.synthetic import generate, read_ground_truth, write_ground_truth
from ..utils.common import format_probability
from ..utils.logging import logger
from .run_config import (
    FitVIRun,
    SimulateRun,
    fit_vi_run_from_dict,
    read_run_config,
    simulate_run_from_dict,
    sweep_config_from_dict,
)


def resolve_out_dir(out: Optional[str]) -> Path:
    out_dir = Path(out) if out else BIP_OUTPUT_DIR
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataIOError(f"Could not create output directory {out_dir}: {e}") from e
    return out_dir


def cmd_simulate(
    out_dir: Path,
    preset: Optional[str] = None,
    config: Optional[str] = None,
    p: Optional[int] = None,
    E: Optional[int] = None,
    n: Optional[int] = None,
    strength: Optional[float] = None,
    seed: int = 0,
) -> dict:
    """Generate a dataset and its ground-truth sidecar.

    Settings in a config document take precedence over the keyword arguments.

    Returns:
        Summary dict (also printed)
    """
    if config:
        run = simulate_run_from_dict(read_run_config(config))
    elif preset:
        run = SimulateRun(preset=preset)
    else:
        raise ConfigError("simulate needs --preset or --config (missing field 'preset')")

    p = run.p if run.p is not None else p
    E = run.E if run.E is not None else E
    n = run.n if run.n is not None else n
    strength = run.strength if run.strength is not None else strength
    seed = run.seed if run.seed is not None else seed

    if run.preset in UQ_PRESETS:
        if run.overrides:
            raise ConfigError(f"Preset {run.preset} does not accept generator overrides: {sorted(run.overrides)}")
        data, truth = simulate_preset(run.preset, E=E, n=n, seed=seed)
    else:
        cfg = get_preset(run.preset, p=p, E=E, n=n, strength=strength, seed=seed)
        if run.overrides:
            cfg = replace(cfg, **run.overrides).validate()
        data, truth = generate(cfg)

    dataset_path = write_dataset_csv(data, out_dir / "dataset.csv")
    truth_path = write_ground_truth(truth, out_dir / "ground_truth.json")

    summary = {
        "preset": run.preset,
        "p": data.p,
        "E": data.n_envs,
        "n": list(data.sizes),
        "z_star": str(truth.z_star),
        "z_star_size": truth.z_star.cardinality,
        "intervened_fractions": [round(truth.intervened_fraction(e), 4) for e in range(truth.n_envs)],
        "dataset": str(dataset_path),
        "ground_truth": str(truth_path),
    }
    print(f"Simulated {run.preset}: p={data.p}, E={data.n_envs}, n={data.sizes[0]} per environment")
    print(f"  z* = {truth.z_star} (|z*| = {truth.z_star.cardinality})")
    print(f"  intervened fractions: {summary['intervened_fractions']}")
    print(f"  wrote {dataset_path} and {truth_path}")
    return summary


def cmd_fit_exact(
    dataset: str,
    out_dir: Path,
    prior: str = "uniform",
    p_max: Optional[int] = None,
    threads: Optional[int] = None,
    max_p: Optional[int] = None,
):
    """Exact posterior over the prior support; writes posterior.csv."""
    data = read_dataset_csv(dataset)
    logger.info(f"Environment sizes: {list(data.sizes)}")
    prior_obj = parse_prior_spec(prior, data.p, p_max)
    table = exact_posterior(data, prior_obj, threads=threads, max_p=max_p)
    print(f"Prior: {prior_obj.describe()}")
    path = write_posterior_csv(table, out_dir / "posterior.csv")

    mode = posterior_mode(table)
    marginals = marginal_inclusion(table)
    print(f"Posterior mode: {mode} (mass {format_probability(table.lookup(mode).posterior)})")
    print("Marginal inclusion: " + ", ".join(f"x{j + 1}={format_probability(m)}" for j, m in enumerate(marginals)))
    for t in SELECTION_THRESHOLDS:
        print(f"  t={t}: {select_by_threshold(marginals, t)}")
    print(f"Wrote {len(table.entries)} rows to {path}")
    return table


def _vi_outputs(phi: np.ndarray) -> dict:
    return {
        "selections": {str(t): str(variational_mode(phi, t)) for t in SELECTION_THRESHOLDS},
        "marginals": expit(phi).tolist(),
    }


def cmd_fit_vi(
    dataset: str,
    out_dir: Path,
    config: Optional[str] = None,
    prior: Optional[str] = None,
    p_max: Optional[int] = None,
    seed: int = 0,
    threads: int = 1,
) -> dict:
    """VI over selectors; writes vi_log.jsonl, best_phi.json and selections.json.

    On a non-finite gradient the last finite phi is written to
    last_good_phi.json before the error propagates.
    """
    document = dict(read_run_config(config)) if config else {}
    document.setdefault("seed", seed)
    document.setdefault("threads", threads)
    document.pop("version", None)
    run: FitVIRun = fit_vi_run_from_dict(document)

    data = read_dataset_csv(dataset)
    prior_obj = parse_prior_spec(prior or run.prior, data.p, p_max if p_max is not None else run.p_max)

    log_path = out_dir / "vi_log.jsonl"
    try:
        log_file = open(log_path, "w")
    except OSError as e:
        raise DataIOError(f"Could not open {log_path}: {e}") from e

    def sink(record: dict):
        log_file.write(json.dumps(record) + "\n")

    try:
        if run.inits:
            first = run.vi.phi_init if run.vi.phi_init is not None else tuple(default_phi_init(prior_obj))
            state = run_vi_multi_start(data, prior_obj, run.vi, [first, *run.inits], log_sink=sink)
        else:
            state = run_vi(data, prior_obj, run.vi, log_sink=sink)
    except NonFiniteGradient as e:
        if e.last_good_phi is not None:
            write_json({"step": e.step, "phi": np.asarray(e.last_good_phi).tolist()}, out_dir / "last_good_phi.json")
        raise
    finally:
        log_file.close()

    write_json(
        {"best_phi": state.best_phi.tolist(), "best_elbo": state.best_elbo, "best_step": state.best_step, "steps": state.step},
        out_dir / "best_phi.json",
    )
    outputs = _vi_outputs(state.best_phi)
    write_json(outputs, out_dir / "selections.json")

    print(f"VI finished after {state.step} steps; best ELBO {state.best_elbo:.4f} at step {state.best_step}")
    for t, z in outputs["selections"].items():
        print(f"  t={t}: {z}")
    print(f"Wrote {log_path}, best_phi.json and selections.json to {out_dir}")
    return outputs


def cmd_sweep(config: str, out_dir: Path, seed: Optional[int] = None, threads: Optional[int] = None):
    document = read_run_config(config)
    cfg = sweep_config_from_dict(document)
    if seed is not None and "seed" not in document:
        cfg = replace(cfg, seed=seed)
    if threads is not None and "threads" not in document:
        cfg = replace(cfg, threads=threads)

    result = run_sweep(cfg)
    path = write_sweep_csv(result.rows, out_dir / "sweep.csv")
    print(result.rows.to_string(index=False))
    print(f"Wrote {path}")
    if result.theory is not None:
        theory_path = write_sweep_csv(result.theory, out_dir / "theory.csv")
        print(result.theory.to_string(index=False))
        print(f"Wrote {theory_path}")
    return result


def cmd_theory(
    ground_truth: str,
    out_dir: Path,
    prior: str = "uniform",
    p_max: Optional[int] = None,
    envs: Optional[Sequence[int]] = None,
    samples: Optional[int] = None,
    seed: int = 0,
    threads: int = 1,
    posterior: Optional[str] = None,
    max_p: Optional[int] = None,
):
    """mu(z) table, mu_min and R for a ground truth; writes theory.json.

    With a posterior table, the TV distance to the point mass at z* is added.
    """
    truth = read_ground_truth(ground_truth)
    prior_obj = parse_prior_spec(prior, truth.p, p_max)
    diagnostics = mu_min_and_R(truth, prior_obj, envs=envs, n_samples=samples, seed=seed, threads=threads, max_p=max_p)
    if posterior:
        diagnostics.tv_to_truth = tv_to_dirac(read_posterior_csv(posterior), truth.z_star)

    path = write_json(diagnostics.to_dict(), out_dir / "theory.json")
    print(f"z* = {truth.z_star}; mu(z*) = {diagnostics.mu[str(truth.z_star)]:.5f}")
    print(f"mu_min = {diagnostics.mu_min:.5f} (SE {diagnostics.mu_min_std_error:.5f}) at {diagnostics.argmin}; R = {diagnostics.R:g}")
    if diagnostics.tv_to_truth is not None:
        print(f"TV to point mass at z*: {diagnostics.tv_to_truth:.5f}")
    print(f"Wrote {path}")
    return diagnostics


def load_selection(path: str, threshold: float = 0.5) -> FeatureSelector:
    """Read a selector from a fit-exact posterior CSV (its mode), a fit-vi selections.json, or {"z": "101"}."""
    path = Path(path)
    if path.suffix == ".csv":
        return posterior_mode(read_posterior_csv(path))
    try:
        document = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataIOError(f"Could not read selection {path}: {e}") from e
    try:
        if "z" in document:
            return FeatureSelector.from_string(document["z"])
        return FeatureSelector.from_string(document["selections"][str(threshold)])
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Selection file {path} has no selector for threshold {threshold}: {e}") from e


def cmd_evaluate(selection: str, ground_truth: str, threshold: float = 0.5) -> dict:
    """Score one selection against a ground-truth sidecar; prints JSON."""
    truth = read_ground_truth(ground_truth)
    z_hat = load_selection(selection, threshold)
    report = EvalReport.from_replicates([(z_hat, truth.z_star)])
    row = report.per_replicate[0]
    document = {"z_hat": str(z_hat), "z_star": str(truth.z_star), "exact": row.exact, "covered": row.covered}
    if truth.alternative_invariant:
        document["alternative_invariant"] = [str(z) for z in truth.alternative_invariant]
        document["matches_alternative"] = any(z_hat.bits == z.bits for z in truth.alternative_invariant)
    print(json.dumps(document))
    logger.info(f"Evaluated {selection}: exact={row.exact}, covered={row.covered}")
    return document
