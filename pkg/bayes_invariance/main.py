import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from dotenv import load_dotenv

# Load environment variables from .env file before config is imported
env_path = Path(__file__).parent.parent / ".env"
load_dotenv(dotenv_path=env_path)

from .app import mcp
from .config import BIP_THREADS
from .errors import BIPError
from .utils.logging import logger

# Register MCP tools and resources
from .tools import diagnostics, files, inference, simulation  # noqa: F401
from .resources import outputs  # noqa: F401

from .cli.commands import (
    cmd_evaluate,
    cmd_fit_exact,
    cmd_fit_vi,
    cmd_simulate,
    cmd_sweep,
    cmd_theory,
    resolve_out_dir,
)


def _env_list(text: Optional[str]) -> Optional[list[int]]:
    if not text:
        return None
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--envs expects comma-separated integers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="Master seed (default: 0)")
    common.add_argument("--threads", type=int, default=None, help=f"Worker count (default: BIP_THREADS={BIP_THREADS})")
    common.add_argument("--out", default=None, help="Output directory (default: BIP_OUTPUT_DIR)")

    parser = argparse.ArgumentParser(
        prog="bayes-invariance",
        description="Bayesian invariant feature selection across environments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="Generate a multi-environment dataset")
    p.add_argument("--preset", help="Preset name (appendix-c1-p3, appendix-c3-p10, appendix-c3-p450, uq-example1..3)")
    p.add_argument("--config", help="Simulate configuration JSON")
    p.add_argument("--p", type=int, default=None, help="Feature count override")
    p.add_argument("--envs", type=int, default=None, help="Number of environments")
    p.add_argument("--n", type=int, default=None, help="Rows per environment")
    p.add_argument("--strength", type=float, default=None, help="Intervened fraction of features")

    p = sub.add_parser("fit-exact", parents=[common], help="Exact posterior by enumeration")
    p.add_argument("dataset", help="Dataset CSV file or directory")
    p.add_argument("--prior", default="uniform", help="uniform | max-cardinality[:K] | table JSON path")
    p.add_argument("--p-max", type=int, default=None, help="Cardinality cap for max-cardinality")
    p.add_argument("--max-p", type=int, default=None, help="Enumeration cap override (default: BIP_MAX_ENUM_P)")

    p = sub.add_parser("fit-vi", parents=[common], help="Variational posterior")
    p.add_argument("dataset", help="Dataset CSV file or directory")
    p.add_argument("--config", help="VI configuration JSON")
    p.add_argument("--prior", default=None, help="uniform | max-cardinality[:K] | table JSON path")
    p.add_argument("--p-max", type=int, default=None, help="Cardinality cap for max-cardinality")

    p = sub.add_parser("sweep", parents=[common], help="Run a simulation grid")
    p.add_argument("config", help="Sweep configuration JSON")

    p = sub.add_parser("theory", parents=[common], help="Heterogeneity diagnostics from a ground truth")
    p.add_argument("ground_truth", help="ground_truth.json written by simulate")
    p.add_argument("--prior", default="uniform", help="uniform | max-cardinality[:K] | table JSON path")
    p.add_argument("--p-max", type=int, default=None, help="Cardinality cap for max-cardinality")
    p.add_argument("--envs", type=_env_list, default=None, help="Environment ids, e.g. 0,1 (default: all)")
    p.add_argument("--samples", type=int, default=None, help="Monte Carlo draws per environment (default: BIP_MC_SAMPLES)")
    p.add_argument("--posterior", default=None, help="posterior.csv to report the TV distance to z*")

    p = sub.add_parser("evaluate", parents=[common], help="Score a selection against a ground truth")
    p.add_argument("selection", help="posterior.csv, selections.json or {\"z\": ...} JSON")
    p.add_argument("ground_truth", help="ground_truth.json written by simulate")
    p.add_argument("--threshold", type=float, default=0.5, help="Threshold to read from selections.json")

    p = sub.add_parser("serve", help="Run the MCP server")
    p.add_argument("--transport", default="stdio", choices=["stdio", "sse"], help="Transport protocol to use")
    p.add_argument("--host", default="0.0.0.0", help="Host to bind to (for SSE)")
    p.add_argument("--port", type=int, default=8000, help="Port to listen on (for SSE)")
    return parser


def serve(transport: str, host: str, port: int):
    if transport == "sse":
        print(f"🔌 Bayes invariance MCP server on http://{host}:{port} (SSE)", file=sys.stderr)
        import uvicorn

        uvicorn.run(mcp.sse_app(), host=host, port=port)
    else:
        print("🔌 Bayes invariance MCP server running in STDIO mode", file=sys.stderr)
        mcp.run(transport="stdio")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point for the bayes-invariance command; returns the process exit code."""
    args = build_parser().parse_args(argv)

    if args.command == "serve":
        serve(args.transport, args.host, args.port)
        return 0

    threads = BIP_THREADS if args.threads is None else args.threads
    try:
        if args.command == "evaluate":
            cmd_evaluate(args.selection, args.ground_truth, args.threshold)
            return 0

        out_dir = resolve_out_dir(args.out)
        if args.command == "simulate":
            cmd_simulate(out_dir, args.preset, args.config, args.p, args.envs, args.n, args.strength, args.seed)
        elif args.command == "fit-exact":
            cmd_fit_exact(args.dataset, out_dir, args.prior, args.p_max, threads, args.max_p)
        elif args.command == "fit-vi":
            cmd_fit_vi(args.dataset, out_dir, args.config, args.prior, args.p_max, args.seed, threads)
        elif args.command == "sweep":
            cmd_sweep(args.config, out_dir, args.seed, args.threads)
        elif args.command == "theory":
            cmd_theory(
                args.ground_truth,
                out_dir,
                args.prior,
                args.p_max,
                args.envs,
                args.samples,
                args.seed,
                threads,
                args.posterior,
            )
    except BIPError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
