"""
dumpscrub - Command Line Entry Point
Redacts sensitive data from memory dumps and logs (analyze, feedback, augment, generate, bench)
"""

import argparse
import json
import sys

from dotenv import load_dotenv

from config import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_RUNTIME_FAILURE, PROCESSING_MODES, RUN_MODES
from backend.utils.errors import ScrubError
from backend.utils.logger import get_logger
from backend.utils.utils import get_config_path

logger = get_logger(__name__)

# Load environment variables from config file at application startup
load_dotenv(get_config_path(), override=True)


def _seed(value: str) -> int:
    seed = int(value, 0)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return number


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="dumpscrub",
        description="Find and redact sensitive data in memory dumps and log files.",
    )
    parser.add_argument("run_mode", choices=RUN_MODES, help="what to run")
    parser.add_argument("--config", required=True, help="run configuration JSON")
    parser.add_argument("--threads", type=_positive_int, help="worker count (overrides the config)")
    parser.add_argument("--mode", choices=PROCESSING_MODES, help="processing mode (overrides the config)")
    parser.add_argument("--budget", type=float, help="time budget in seconds for dynamic mode")
    parser.add_argument("--seed", type=_seed, help="seed for generate and bench")
    parser.add_argument("--out", help="generate: dump output path")
    parser.add_argument("--manifest", help="generate: manifest output path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    from backend.services import engine

    try:
        config = engine.load_engine_config(
            args.config,
            {
                "mode": args.run_mode,
                "threads": args.threads,
                "processing_mode": args.mode,
                "time_budget": args.budget,
                "seed": args.seed,
            },
        )
        if args.run_mode == "generate":
            result = engine.run_generate(config, output=args.out, manifest=args.manifest)
        else:
            result = engine.run(config)
    except ScrubError as e:
        logger.error(f"{args.run_mode} failed: {e}")
        print(f"dumpscrub: error: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return EXIT_RUNTIME_FAILURE
    except Exception as e:
        logger.error(f"{args.run_mode} failed: {e}", exc_info=True)
        print(f"dumpscrub: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME_FAILURE

    if args.run_mode == "analyze":
        result = {k: v for k, v in result.items() if k != "stats"}
    print(json.dumps(result, indent=2, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
