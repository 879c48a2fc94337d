from pathlib import Path

from ..app import mcp
from ..config import BIP_OUTPUT_DIR
from ..errors import DataIOError
from ..utils.common import format_file_size
from ..utils.logging import logger


def resolve_run_path(name: str) -> Path:
    """Resolve a path given to a tool; relative paths are taken inside the output directory."""
    path = Path(name).expanduser()
    if not path.is_absolute():
        path = BIP_OUTPUT_DIR / path
    return path


def run_dir(name: str) -> Path:
    """Output directory for a tool run, created on demand."""
    path = resolve_run_path(name)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataIOError(f"Could not create output directory {path}: {e}") from e
    return path


@mcp.tool()
def list_output_files() -> str:
    """List run artefacts (datasets, posteriors, VI logs, diagnostics) in the output directory.

    Returns:
        Formatted list of files, relative to the output directory
    """
    logger.info("Tool called: list_output_files()")

    if not BIP_OUTPUT_DIR.exists():
        return f"Output directory does not exist yet: {BIP_OUTPUT_DIR}\n\nRun simulate_dataset to create it."

    files = sorted(f for f in BIP_OUTPUT_DIR.rglob("*") if f.is_file())
    if not files:
        return f"No files found in output directory: {BIP_OUTPUT_DIR}"

    result = f"📁 Run artefacts ({len(files)} files):\n"
    result += f"Location: {BIP_OUTPUT_DIR}\n\n"
    for i, file_path in enumerate(files, 1):
        result += f"{i}. {file_path.relative_to(BIP_OUTPUT_DIR)}\n"
        result += f"   Size: {format_file_size(file_path.stat().st_size)}\n"
    return result
