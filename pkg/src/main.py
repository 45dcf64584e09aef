#!/usr/bin/env python3
"""
Main entry point for lawline.

This module parses the command line, configures logging and dispatches to the
subcommand handlers in src.cli. Exit codes: 0 success, 1 I/O error, 2 domain or
fit error, 3 invalid arguments (argparse errors and UsageError from a handler).
"""
import argparse
import sys
from typing import List, Optional, Tuple

from pydantic import ValidationError

from src.cli import cmd_compare, cmd_fit, cmd_predict, cmd_report, cmd_simulate
from src.core.errors import EmptyInputError, InvalidArgumentError, LawlineError, UsageError
from src.core.logger import configure_logging, get_logger
from src.core.settings import DEFAULT_INTERVAL, LOG_FILE, LOG_LEVEL, THREADS, __version__
from src.core.types import LossUnit
from src.ingest import RecordFormat
from src.synth import InterventionKind

logger = get_logger("main")

EXIT_OK = 0
EXIT_IO = 1
EXIT_DOMAIN = 2
EXIT_USAGE = 3


class LawlineArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that exits with the usage code 3 instead of 2."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_interval(text: str) -> Tuple[float, float]:
    """``LO:HI`` with LO < HI."""
    lo_text, sep, hi_text = text.partition(":")
    try:
        if not sep:
            raise ValueError
        lo, hi = float(lo_text), float(hi_text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got '{text}'") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"interval needs LO < HI, got {lo}:{hi}")
    return lo, hi


def parse_count(text: str) -> int:
    """Positive integer, also in scientific notation (``4e8``)."""
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{text}'") from None
    if not value.is_integer() or value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got '{text}'")
    return int(value)


def parse_size(text: str) -> int:
    """Non-negative integer."""
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {value}")
    return value


def parse_labels(text: str) -> List[str]:
    labels = [part.strip() for part in text.split(",") if part.strip()]
    if not labels:
        raise argparse.ArgumentTypeError("expected one or more comma-separated dataset labels")
    return labels


def parse_intervention(text: str) -> Tuple[InterventionKind, float]:
    """``KIND:MAGNITUDE`` with KIND one of data, arch, tokenizer."""
    kind_text, sep, magnitude_text = text.partition(":")
    try:
        if not sep:
            raise ValueError
        kind = InterventionKind.parse(kind_text)
        magnitude = float(magnitude_text)
    except (ValueError, InvalidArgumentError):
        raise argparse.ArgumentTypeError(f"expected KIND:MAGNITUDE (data, arch, tokenizer), got '{text}'") from None
    if magnitude < 0:
        raise argparse.ArgumentTypeError(f"magnitude must be >= 0, got {magnitude}")
    return kind, magnitude


def _common_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--out", default="lawline_out", help="Output directory (default: lawline_out)")
    parent.add_argument("--threads", type=parse_count, default=THREADS, help="Worker cap (default: LAWLINE_THREADS or CPU count)")
    parent.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    parent.add_argument("--debug", action="store_true", help="Enable debug logging")
    parent.add_argument("--verbose", action="store_true", help="Enable info logging and progress bars")
    return parent


def _records_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--format", choices=[f.value for f in RecordFormat], default=None, help="Record format (default: from suffix)")
    parent.add_argument("--unit", choices=[u.value for u in LossUnit], default=None, help="Convert losses to this unit before fitting")
    parent.add_argument("--x-dataset", type=parse_labels, default=None, help="x-axis dataset(s), comma-separated")
    parent.add_argument("--y-datasets", type=parse_labels, default=None, help="y-axis dataset(s), comma-separated")
    parent.add_argument(
        "--average",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="Average several x (or y) datasets into one loss (default: on)",
    )
    parent.add_argument("--min-n", type=parse_count, default=None, help="Drop checkpoints with fewer parameters")
    parent.add_argument("--max-n", type=parse_count, default=None, help="Drop checkpoints with more parameters")
    return parent


def build_parser() -> argparse.ArgumentParser:
    """The lawline argument parser with its five subcommands."""
    common = _common_parent()
    records = _records_parent()

    parser = LawlineArgumentParser(prog="lawline", description="Fit and compare loss-to-loss scaling laws")
    parser.add_argument("--version", action="version", version=f"lawline {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    fit = subparsers.add_parser("fit", parents=[common, records], help="Fit compute-to-loss and loss-to-loss laws")
    fit.add_argument("inputs", nargs="+", help="Record files (.jsonl or .csv)")
    fit.set_defaults(handler=cmd_fit)

    compare = subparsers.add_parser("compare", parents=[common, records], help="Area-between-curves matrix")
    compare.add_argument("inputs", nargs="+", help="Law files (.json) and/or record files")
    compare.add_argument("--interval", type=parse_interval, default=DEFAULT_INTERVAL, help="x range LO:HI (default: 0:2)")
    compare.set_defaults(handler=cmd_compare)

    predict = subparsers.add_parser("predict", parents=[common], help="Forecast test loss from N and D")
    predict.add_argument("inputs", nargs="+", help="Law files (.json)")
    predict.add_argument("--params-n", type=parse_count, required=True, help="Parameters N")
    predict.add_argument("--tokens-d", type=parse_count, required=True, help="Training tokens D")
    predict.add_argument("--config", default=None, help="Configuration label to use")
    predict.add_argument("--x-dataset", default=None, help="Train-side dataset")
    predict.add_argument("--y-dataset", default=None, help="Test-side dataset")
    predict.set_defaults(handler=cmd_predict)

    simulate = subparsers.add_parser("simulate", parents=[common], help="Generate synthetic records")
    simulate.add_argument("world", help="World file (.json, .yaml or .yml)")
    simulate.add_argument(
        "--intervention",
        type=parse_intervention,
        action="append",
        default=[],
        help="Add an intervened world, KIND:MAGNITUDE with KIND in data, arch, tokenizer (repeatable)",
    )
    simulate.set_defaults(handler=cmd_simulate)

    report = subparsers.add_parser("report", parents=[common, records], help="Report tables, curve samples and SVG plots")
    report.add_argument("inputs", nargs="*", help="Law files (.json) and/or record files")
    report.add_argument("--matrix", action="append", default=[], help="Intervention matrix JSON (repeatable)")
    report.add_argument("--interval", type=parse_interval, default=DEFAULT_INTERVAL, help="x range LO:HI (default: 0:2)")
    report.add_argument("--subsample", type=parse_size, default=None, help="Scatter points shown per group")
    report.set_defaults(handler=cmd_report)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the application."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if args.debug:
        configure_logging("DEBUG", LOG_FILE)
        logger.debug("Debug logging enabled")
    elif args.verbose:
        configure_logging("INFO", LOG_FILE)
    else:
        configure_logging(LOG_LEVEL, LOG_FILE)

    try:
        return args.handler(args)
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO
    except UsageError as e:
        parser.print_usage(sys.stderr)
        logger.error(f"{args.command}: {e}")
        return EXIT_USAGE
    except EmptyInputError as e:
        logger.error(str(e))
        for diagnostic in e.diagnostics:
            logger.error(f"  {diagnostic}")
        return EXIT_DOMAIN
    except (LawlineError, ValidationError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
