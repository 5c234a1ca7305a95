"""
Main entry point.
`python -m spmalab.main <command> ...` runs experiments, acceptance suites and reports.
"""
import argparse
import logging
import sys
from typing import List, Optional

from spmalab import settings
from spmalab.commands import grid, report, run, verify
from spmalab.errors import ConfigError, LabError

logger = logging.getLogger("spmalab")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spmalab", description="Softmax policy mirror ascent laboratory")
    parser.add_argument("--output-dir", default=None, help=f"results directory (default: config or {settings.OUTPUT_DIR})")
    parser.add_argument("--threads", type=int, default=settings.THREADS, help="worker threads, 0 = auto")
    parser.add_argument("--no-svg", action="store_true", help="skip the SVG chart")
    parser.add_argument("--seed-offset", type=int, default=0, help="added to every seed in the config")
    parser.set_defaults(default_output_dir=settings.OUTPUT_DIR)

    subparsers = parser.add_subparsers(dest="command", required=True)
    # Commands
    run.register(subparsers)
    grid.register(subparsers)
    verify.register(subparsers)
    report.register(subparsers)
    return parser


def configure_logging(level: str = settings.LOG_LEVEL) -> None:
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    if args.threads < 0:
        logger.error("❌ --threads must be >= 0")
        return 2
    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error("❌ invalid config: %s", e)
        return 2
    except LabError as e:
        logger.error("❌ %s: %s", type(e).__name__, e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
