from ..app import mcp
from ..config import BIP_OUTPUT_DIR


@mcp.resource("runs://{filename}")
def get_run_file(filename: str) -> str:
    """Read a text artefact (CSV, JSON, JSONL) from the output directory."""
    file_path = BIP_OUTPUT_DIR / filename

    # Security check
    if not file_path.resolve().is_relative_to(BIP_OUTPUT_DIR.resolve()):
        raise ValueError("Access denied: path outside output directory")

    if not file_path.is_file():
        raise FileNotFoundError(f"File not found: {filename}")

    return file_path.read_text()
