"""CLI commands for gtcnn."""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from gtcnn.config import ExperimentConfig, Settings, load_experiment_config, load_settings
from gtcnn.errors import GTCNNError
from gtcnn.experiments import (
    run_epsilon_sweep,
    run_generation,
    run_source_localization,
    run_spectral_dump,
    run_stability_sweep,
    run_window_sweep,
)
from gtcnn.utils import configure_logging, print_table

SWEEPS = ("snr", "epsilon", "window")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="Experiment config (.json or .toml)")
    parser.add_argument("--out", type=Path, help="Output directory (default: output_dir of the config)")
    parser.add_argument("--seed", type=int, help="Override the experiment seed")
    parser.add_argument("--threads", type=int, help="Worker threads for independent runs")
    parser.add_argument(
        "--log-level",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help="Logging verbosity",
    )


def create_parser() -> argparse.ArgumentParser:
    """Create the argument parser with subcommands."""
    parser = argparse.ArgumentParser(
        prog="gtcnn",
        description="gtcnn - graph-time convolutional networks and their stability",
    )
    subparsers = parser.add_subparsers(dest="command")

    # gen command
    gen_parser = subparsers.add_parser("gen", help="Generate the graphs and dataset of an experiment")
    _add_common(gen_parser)

    # train command
    train_parser = subparsers.add_parser("train", help="Train every configured model variant")
    _add_common(train_parser)

    # stability command
    stability_parser = subparsers.add_parser(
        "stability", help="Measure a trained model under spatial-graph perturbations"
    )
    _add_common(stability_parser)
    stability_parser.add_argument("--checkpoint", type=Path, help="Trained model checkpoint")
    stability_parser.add_argument(
        "--sweep", choices=SWEEPS, default="snr", help="Sweep over SNR, ε or window length"
    )

    # spectral command
    spectral_parser = subparsers.add_parser(
        "spectral", help="Dump normalized frequency responses of a trained model"
    )
    _add_common(spectral_parser)
    spectral_parser.add_argument("--checkpoint", type=Path, help="Trained model checkpoint")

    return parser


def _load(args: argparse.Namespace) -> tuple[ExperimentConfig, Settings, Path]:
    """Experiment config, settings and output directory with CLI overrides applied."""
    settings = load_settings()
    cfg = load_experiment_config(args.config) if args.config is not None else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.threads is not None:
        settings = replace(settings, threads=max(1, args.threads))
    if args.log_level is not None:
        settings = replace(settings, log_level=args.log_level)
    configure_logging(settings.log_level)
    out_dir = args.out if args.out is not None else Path(cfg.output_dir)
    return cfg, settings, out_dir


def cmd_gen(args: argparse.Namespace) -> int:
    """Write graph.json, temporal.json and dataset.npz."""
    cfg, _, out_dir = _load(args)
    data = run_generation(cfg, out_dir)
    print(
        f"Generated {len(data.dataset)} samples on N={data.spatial.n}, T={data.temporal.n} "
        f"in {out_dir}"
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    """Train the configured variants and print the summary table."""
    cfg, settings, out_dir = _load(args)
    header, rows = run_source_localization(cfg, out_dir, settings.threads, settings.float_digits)
    print_table(cfg.task.value.replace("_", " "), header, rows)
    return 0


def cmd_stability(args: argparse.Namespace) -> int:
    """Run one of the stability sweeps."""
    cfg, settings, out_dir = _load(args)
    threads, digits = settings.threads, settings.float_digits
    if args.sweep == "snr":
        rows = run_stability_sweep(cfg, out_dir, args.checkpoint, threads, digits)
        print(f"Wrote {len(rows)} perturbation trials to {out_dir}")
    elif args.sweep == "epsilon":
        summary = run_epsilon_sweep(cfg, out_dir, args.checkpoint, threads, digits)
        print(
            f"R^2 of distance vs epsilon: {summary['r2']:.4f}; "
            f"{summary['violations']} of {summary['trials']} trials exceed the bound"
        )
    else:
        rows = run_window_sweep(cfg, out_dir, threads, digits)
        print(f"Wrote {len(rows)} window lengths to {out_dir}")
    return 0


def cmd_spectral(args: argparse.Namespace) -> int:
    """Dump the frequency responses of a checkpoint."""
    cfg, settings, out_dir = _load(args)
    checkpoint = args.checkpoint if args.checkpoint is not None else cfg.spectral.checkpoint
    if checkpoint is None:
        print("Error: --checkpoint is required (or set spectral.checkpoint).", file=sys.stderr)
        return 1
    degenerate = run_spectral_dump(cfg, checkpoint, out_dir, settings.float_digits)
    print(f"Wrote responses to {out_dir}; {len(degenerate)} degenerate filters")
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "stability": cmd_stability,
    "spectral": cmd_spectral,
}


def run_cli(argv: list[str] | None = None) -> int | None:
    """Parse arguments and dispatch to command handlers.

    Returns:
        Exit code (0 for success, non-zero for error) if a command was handled,
        None if no command was specified.
    """
    parser = create_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        return None

    try:
        return COMMANDS[args.command](args)
    except GTCNNError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return 1
