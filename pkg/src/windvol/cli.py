"""Command-line entry point: ``windvol <stage> [--config FILE] [--out DIR] ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, pipeline
from .errors import ConfigInvalid, WindVolError

logger = logging.getLogger("windvol")

STAGE_COMMANDS = pipeline.STAGES + ("fit",)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="experiment TOML (default: bundled synthetic config)")
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    p.add_argument("--threads", type=int, help="worker threads for per-station loops")
    p.add_argument("--decay", type=float, help="directional weight decay distance in metres")
    p.add_argument("--force", action="store_true", help="ignore cached artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="windvol", description="Spatiotemporal wind-speed volatility pipeline.")
    parser.add_argument("--version", action="version", version=f"windvol {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for stage in STAGE_COMMANDS:
        _add_common(sub.add_parser(stage, help=f"run the {stage} stage"))
    p = sub.add_parser("all", help="run every stage in order")
    _add_common(p)
    p = sub.add_parser("reproduce", help="full design plus side-by-side tables against published values")
    _add_common(p)
    p.add_argument("--preset", choices=("synthetic", "agrimonia"), default="synthetic")
    p.add_argument("--data-dir", type=Path, help="directory holding ws10.csv and ws100.csv (agrimonia preset)")
    p = sub.add_parser("synth", help="write the synthetic dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--stations", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p = sub.add_parser("convert", help="reshape a raw Agrimonia CSV into ws10.csv / ws100.csv")
    p.add_argument("raw", type=Path)
    p.add_argument("--out", type=Path, required=True)
    return parser


def _config(args) -> pipeline.ExperimentConfig:
    if getattr(args, "preset", None) == "agrimonia":
        if args.data_dir is None:
            raise ConfigInvalid("--preset agrimonia needs --data-dir")
        cfg = pipeline.agrimonia_config(args.data_dir, args.out or Path("windvol-agrimonia"))
    else:
        cfg = pipeline.load_config(args.config or pipeline.bundled_config_path())
    return pipeline.with_overrides(cfg, seed=args.seed, threads=args.threads, out=args.out, decay=args.decay)


def _dispatch(args) -> list[Path]:
    if args.command == "synth":
        from .synthetic import write_synthetic_dataset

        return list(write_synthetic_dataset(args.out, args.stations, args.seed).values())
    if args.command == "convert":
        from .ingest import convert_agrimonia

        return list(convert_agrimonia(args.raw, args.out).values())
    cfg = _config(args)
    if args.command == "reproduce":
        return pipeline.reproduce(cfg, force=args.force)
    if args.command == "all":
        return pipeline.run_all(cfg, force=args.force)
    return pipeline.run_stage(args.command, cfg, force=args.force)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        paths = _dispatch(args)
    except WindVolError as exc:
        print(f"windvol: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
