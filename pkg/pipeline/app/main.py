import contextlib
import logging
import sys
from typing import List, Optional

from .commands import annotation, evaluation, reports, statistics, synthetic
from .commands.common import EXIT_INVALID, CliParser
from .core.config import VERSION, configure_logging
from .core.errors import AnnotationToolError

logger = logging.getLogger(__name__)

COMMAND_MODULES = (reports, annotation, evaluation, statistics, synthetic)


def build_parser() -> CliParser:
    parser = CliParser(
        prog="lesion-annotate",
        description="Report-guided automatic lesion annotation and detection evaluation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    subparsers = parser.add_subparsers(dest="subcommand", metavar="subcommand")
    subparsers.required = True
    for module in COMMAND_MODULES:
        module.register(subparsers)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch the subcommand and map failures to exit codes."""
    try:
        args = build_parser().parse_args(argv)
    except AnnotationToolError as e:
        with contextlib.suppress(AnnotationToolError):
            configure_logging()
        logger.error("%s", e.detail)
        return EXIT_INVALID

    try:
        configure_logging(args.verbose)
        return args.handler(args)
    except AnnotationToolError as e:
        logger.error("%s failed: %s", args.subcommand, e.detail)
        return e.exit_code
    except OSError as e:
        # Output directory or input file problems outside any single case
        logger.error("%s failed: %s", args.subcommand, e)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
