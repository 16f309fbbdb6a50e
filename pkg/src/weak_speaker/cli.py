from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, NoReturn, Optional, Sequence

import structlog
from pydantic import ValidationError

from .config.settings import Settings, load_settings
from .errors import (
    ConfigurationError,
    MissingArtifactError,
    NumericalError,
    WeakSpeakerError,
)
from .pipeline import commands
from .pipeline.log_setup import attach_file_log, configure_logging, detach_file_log

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MISSING_ARTIFACT = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 instead of argparse's 2, which means a missing artifact."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        type=str,
        help="Path to a settings YAML file layered over defaults and environment variables.",
    )
    common.add_argument("--seed", type=int, help="Global seed for every random substream.")
    common.add_argument(
        "--threads",
        type=int,
        help="Worker threads; results are identical for every value.",
    )
    return common


def _add_stage2_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sub-centers", type=int, help="Sub-centers per class in the head.")
    parser.add_argument("--margin-start", type=float, help="AAM margin of the first epoch.")
    parser.add_argument("--margin-end", type=float, help="AAM margin of the last epoch.")


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = _Parser(
        prog="weak-speaker",
        description="Weakly supervised speaker-embedding training pipeline",
    )
    subparsers = parser.add_subparsers(dest="command", parser_class=_Parser)

    subparsers.add_parser("synth", parents=[common], help="Generate the synthetic corpus and trials")

    ingest = subparsers.add_parser(
        "ingest", parents=[common], help="Compute features for 16 kHz PCM16 mono WAV files"
    )
    ingest.add_argument("--wav-dir", type=Path, required=True, help="Directory holding the WAV files.")
    ingest.add_argument(
        "--manifest",
        type=Path,
        required=True,
        help="TSV of recording_id, weak_label and WAV path relative to --wav-dir.",
    )

    subparsers.add_parser(
        "diarize", parents=[common], help="Diarize every recording and cache the clusterings"
    )

    weak = subparsers.add_parser(
        "train-weak", parents=[common], help="Stage 1: train from recording-level labels"
    )
    weak.add_argument("--aggregation", choices=("max", "lse"), help="Cluster aggregation function.")
    weak.add_argument("--tau-start", type=float, help="Log-sum-exp temperature of the first epoch.")
    weak.add_argument(
        "--tau-end",
        type=float,
        help="Log-sum-exp temperature of the last epoch (omit for a constant temperature).",
    )

    select = subparsers.add_parser(
        "select", parents=[common], help="Self-label chunks with a stage-1 model"
    )
    select.add_argument("--model", type=str, help="Stage-1 model name (default: configured variant).")

    strong = subparsers.add_parser(
        "train-strong", parents=[common], help="Stage 2: supervised training on self-labeled chunks"
    )
    _add_stage2_flags(strong)

    reference = subparsers.add_parser(
        "train-reference",
        parents=[common],
        help="Supervised baseline on ground-truth target-speaker turns",
    )
    _add_stage2_flags(reference)

    evaluate = subparsers.add_parser(
        "eval", parents=[common], help="Score the verification trials with trained models"
    )
    evaluate.add_argument(
        "--model",
        action="append",
        dest="models",
        help="Model to evaluate; repeatable. 'untrained' scores a fresh network. Default: all.",
    )

    subparsers.add_parser("report", parents=[common], help="Write the comparison tables")
    return parser


def _apply_overrides(settings: Settings, args: argparse.Namespace) -> Settings:
    if args.seed is not None:
        settings.seed = args.seed
    if args.threads is not None:
        settings.threads = args.threads

    aggregation = settings.training.aggregation
    if getattr(args, "aggregation", None) is not None:
        aggregation.kind = args.aggregation
    if getattr(args, "tau_start", None) is not None:
        aggregation.tau_start = args.tau_start
        if getattr(args, "tau_end", None) is None:
            aggregation.tau_end = args.tau_start
            aggregation.schedule = "constant"
    if getattr(args, "tau_end", None) is not None:
        aggregation.tau_end = args.tau_end
        aggregation.schedule = "linear"

    supervised = settings.supervised
    if getattr(args, "sub_centers", None) is not None:
        supervised.sub_centers = args.sub_centers
    if getattr(args, "margin_start", None) is not None:
        supervised.margin_start = args.margin_start
        if getattr(args, "margin_end", None) is None:
            supervised.margin_end = args.margin_start
    if getattr(args, "margin_end", None) is not None:
        supervised.margin_end = args.margin_end

    settings.check()
    return settings


def _dispatch(args: argparse.Namespace, settings: Settings) -> None:
    handlers: dict[str, Callable[[], object]] = {
        "synth": lambda: commands.cmd_synth(settings),
        "ingest": lambda: commands.cmd_ingest(settings, args.wav_dir, args.manifest),
        "diarize": lambda: commands.cmd_diarize(settings),
        "train-weak": lambda: commands.cmd_train_weak(settings),
        "select": lambda: commands.cmd_select(settings, args.model),
        "train-strong": lambda: commands.cmd_train_strong(settings),
        "train-reference": lambda: commands.cmd_train_reference(settings),
        "eval": lambda: commands.cmd_eval(settings, args.models),
        "report": lambda: commands.cmd_report(settings),
    }
    handlers[args.command]()


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_USAGE

    configure_logging(logging.INFO)
    try:
        settings = _apply_overrides(load_settings(args.config), args)
        attach_file_log(settings.work_dir / "logs", args.command)
        _dispatch(args, settings)
    except MissingArtifactError as exc:
        logger.error("cli.missing_artifact", command=args.command, error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT
    except NumericalError as exc:
        logger.error("cli.numerical_failure", command=args.command, error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigurationError, WeakSpeakerError, ValidationError, FileNotFoundError) as exc:
        logger.error("cli.failed", command=args.command, error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        detach_file_log()
    return EXIT_OK


def main() -> None:
    """CLI entry point chaining synth, diarize, train-weak, select, train-strong, eval, report."""

    raise SystemExit(run())


if __name__ == "__main__":
    main()
