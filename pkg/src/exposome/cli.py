"""Command-line entry point: ``exposome <stage> [--config PATH] [--seed N] [--out DIR] [--manifest PATH]``."""

from __future__ import annotations

import argparse
import sys

from .errors import ExposomeError
from .pipeline import STAGES, PipelineConfig, run_pipeline

COMMANDS = {s: s for s in STAGES[:-1]}
COMMANDS["run"] = "report"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="exposome", description="Sensor fusion and wellbeing inference pipeline.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, until in COMMANDS.items():
        help_text = "run the full pipeline" if name == "run" else f"run stages up to {until}"
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="JSON pipeline config")
        sp.add_argument("--seed", type=int, help="base seed (overrides the config)")
        sp.add_argument("--out", help="output directory (default: $EXPOSOME_OUT_DIR or ./exposome-out)")
        sp.add_argument("--manifest", help="session manifest to ingest instead of generating one")
    return p


def config_from_args(args) -> PipelineConfig:
    base = PipelineConfig.load(args.config).__dict__ if args.config else {}
    overrides = {k: v for k, v in (("seed", args.seed), ("out_dir", args.out), ("manifest", args.manifest))
                 if v is not None}
    return PipelineConfig.from_dict({**base, **overrides})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ExposomeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    report, _ = run_pipeline(cfg, until=COMMANDS[args.command])
    for s in report.stages:
        print(f"{s.name:<9} {s.status:<7} {s.seconds:8.2f} s  {len(s.outputs)} files")
    print(f"output: {cfg.output_dir()}")
    if report.error is not None:
        print(f"error: {report.error}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
