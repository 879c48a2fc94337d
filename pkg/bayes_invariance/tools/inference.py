from typing import Optional

from ..app import mcp
from ..cli.commands import cmd_fit_exact, cmd_fit_vi
from ..errors import BIPError, SupportTooLarge
from ..utils.common import capture_stdout, format_probability
from ..utils.logging import logger
from .files import resolve_run_path


@mcp.tool()
def fit_exact_posterior(
    dataset_path: str,
    prior: str = "uniform",
    p_max: Optional[int] = None,
    top: int = 5,
) -> str:
    """Exact posterior over invariant feature sets by enumerating every candidate.

    Feasible up to about 20-25 features; use fit_variational beyond that.

    Args:
        dataset_path: dataset.csv (relative paths are inside the output directory)
        prior: 'uniform', 'max-cardinality' (with p_max) or 'max-cardinality:K'
        p_max: Cardinality cap for the max-cardinality prior
        top: Number of highest-posterior candidates to list

    Returns:
        Posterior mode and mass, marginal inclusion probabilities, top candidates;
        posterior.csv is written next to the dataset
    """
    logger.info(f"Tool called: fit_exact_posterior(dataset_path={dataset_path}, prior={prior}, p_max={p_max})")
    try:
        dataset = resolve_run_path(dataset_path)
        table, text = capture_stdout(cmd_fit_exact, str(dataset), dataset.parent, prior, p_max)
    except SupportTooLarge as e:
        return f"Error: {e}\n\nThe support is too large to enumerate; call fit_variational instead."
    except BIPError as e:
        logger.error(f"fit_exact_posterior failed: {e}")
        return f"Error: {e}"

    result = text + f"\nTop {top} candidates:\n"
    for i, entry in enumerate(table.top(top), 1):
        result += f"{i}. {entry.selector}  posterior={format_probability(entry.posterior)}\n"
    return result


@mcp.tool()
def fit_variational(
    dataset_path: str,
    config_path: Optional[str] = None,
    prior: Optional[str] = None,
    p_max: Optional[int] = None,
    seed: int = 0,
) -> str:
    """Variational posterior over invariant feature sets (scales to hundreds of features).

    Args:
        dataset_path: dataset.csv (relative paths are inside the output directory)
        config_path: Optional VI configuration JSON (version 1)
        prior: 'uniform', 'max-cardinality' (with p_max) or 'max-cardinality:K'
        p_max: Cardinality cap for the max-cardinality prior
        seed: Optimizer seed when the configuration does not set one

    Returns:
        Selected features at thresholds 0.5 to 0.9; vi_log.jsonl, best_phi.json and
        selections.json are written next to the dataset
    """
    logger.info(f"Tool called: fit_variational(dataset_path={dataset_path}, config_path={config_path}, seed={seed})")
    try:
        dataset = resolve_run_path(dataset_path)
        config = str(resolve_run_path(config_path)) if config_path else None
        _, text = capture_stdout(cmd_fit_vi, str(dataset), dataset.parent, config, prior, p_max, seed)
        return text
    except BIPError as e:
        logger.error(f"fit_variational failed: {e}")
        return f"Error: {e}"
