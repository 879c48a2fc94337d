from typing import Optional

from ..app import mcp
from ..cli.commands import cmd_evaluate, cmd_theory
from ..errors import BIPError
from ..utils.common import capture_stdout
from ..utils.logging import logger
from .files import resolve_run_path


@mcp.tool()
def theory_diagnostics(
    ground_truth_path: str,
    envs: Optional[list[int]] = None,
    samples: int = 20000,
    prior: str = "uniform",
    p_max: Optional[int] = None,
    seed: int = 0,
) -> str:
    """Environment heterogeneity for a simulated dataset: mu(z) per candidate, mu_min and R.

    Larger mu_min means the environments separate the invariant set from the
    other candidates more clearly.

    Args:
        ground_truth_path: ground_truth.json (relative paths are inside the output directory)
        envs: Environment ids to use (default: all)
        samples: Monte Carlo draws per environment
        prior: Prior used for the support and R
        p_max: Cardinality cap for the max-cardinality prior
        seed: Monte Carlo seed

    Returns:
        mu table sorted by value, mu_min with its standard error, and R; theory.json is written next to the input
    """
    logger.info(f"Tool called: theory_diagnostics(ground_truth_path={ground_truth_path}, envs={envs}, samples={samples})")
    try:
        path = resolve_run_path(ground_truth_path)
        diagnostics, text = capture_stdout(cmd_theory, str(path), path.parent, prior, p_max, envs, samples, seed)
    except BIPError as e:
        logger.error(f"theory_diagnostics failed: {e}")
        return f"Error: {e}"

    result = text + "\nmu(z) by candidate:\n"
    for z, value in sorted(diagnostics.mu.items(), key=lambda item: item[1]):
        marker = "  <- z*" if z == diagnostics.z_star else ""
        result += f"  {z}: {value:.5f} (SE {diagnostics.mu_std_error[z]:.5f}){marker}\n"
    return result


@mcp.tool()
def evaluate_selection(selection_path: str, ground_truth_path: str, threshold: float = 0.5) -> str:
    """Check a selection (posterior.csv mode or selections.json) against the true invariant set.

    Returns:
        Whether the selection is exact and whether it is a subset of the truth
    """
    logger.info(f"Tool called: evaluate_selection(selection_path={selection_path}, threshold={threshold})")
    try:
        document, _ = capture_stdout(
            cmd_evaluate, str(resolve_run_path(selection_path)), str(resolve_run_path(ground_truth_path)), threshold
        )
    except BIPError as e:
        logger.error(f"evaluate_selection failed: {e}")
        return f"Error: {e}"

    result = f"Selected {document['z_hat']}, true invariant set {document['z_star']}\n"
    result += f"  Exact recovery: {'✅' if document['exact'] else '❌'}\n"
    result += f"  Subset of truth: {'✅' if document['covered'] else '❌'}\n"
    if "alternative_invariant" in document:
        result += f"  Also invariant on these environments: {', '.join(document['alternative_invariant'])}\n"
    return result
