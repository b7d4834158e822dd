import argparse
import logging
import sys
from typing import List, Optional

from . import __version__
from .commands import counterexample, norming, report, simulate, weights
from .core import config as settings
from .core.errors import EXIT_OK, ConfigValidationError, LabError

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app",
        description="Simulation lab for weighted approximations of self-normalized partial-sum processes",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="DEBUG, INFO, WARNING, ERROR")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in (weights, norming, simulate, counterexample, report):
        module.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        args.handler(args)
    except LabError as e:
        logger.error(f"{args.command}: {e.detail}")
        if isinstance(e, ConfigValidationError):
            for violation in e.violations:
                logger.error(f"  {violation}")
        return e.exit_code
    return EXIT_OK
