from typing import Optional

from ..app import mcp
from ..cli.commands import cmd_simulate
from ..errors import BIPError
from ..utils.common import capture_stdout
from ..utils.logging import logger
from .files import run_dir


@mcp.tool()
def simulate_dataset(
    preset: str = "appendix-c1-p3",
    n: Optional[int] = None,
    envs: Optional[int] = None,
    seed: int = 0,
    strength: Optional[float] = None,
    p: Optional[int] = None,
    out_dir: Optional[str] = None,
) -> str:
    """Simulate a multi-environment linear-Gaussian dataset with a known invariant set.

    Args:
        preset: appendix-c1-p3, appendix-c3-p10, appendix-c3-p450, uq-example1, uq-example2 or uq-example3
        n: Rows per environment (preset default if omitted)
        envs: Number of environments (preset default if omitted)
        seed: Master seed; the same seed gives identical files
        strength: Fraction of features intervened on per interventional environment
        p: Feature count override for structural presets
        out_dir: Run directory, relative to the output directory (default: '<preset>-seed<seed>')

    Returns:
        Summary with z*, intervened fractions and the written dataset.csv / ground_truth.json paths
    """
    logger.info(f"Tool called: simulate_dataset(preset={preset}, n={n}, envs={envs}, seed={seed})")
    try:
        target = run_dir(out_dir or f"{preset}-seed{seed}")
        _, text = capture_stdout(cmd_simulate, target, preset=preset, p=p, E=envs, n=n, strength=strength, seed=seed)
        return text
    except BIPError as e:
        logger.error(f"simulate_dataset failed: {e}")
        return f"Error: {e}"
