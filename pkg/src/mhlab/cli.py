"""Command line entry point: ``mhlab run --config FILE --out DIR``.

Exit status is 0 when every check passes, 1 on a failed check and 2 on a
configuration error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiment import PRESETS, SUITES, ConfigError, emit_reports, parse_config, run, summary_line


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhlab")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment and write its reports")
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--preset", choices=sorted(PRESETS), help="built-in experiment")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override run.base_seed")
    p.add_argument("--steps", type=int, help="override run.n_steps")
    p.add_argument("--suite", choices=("all",) + SUITES, help="run a single suite")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if (args.config is None) == (args.preset is None):
        print("error: give exactly one of --config or --preset", file=sys.stderr)
        return 2
    overrides = {}
    if args.seed is not None:
        overrides["run.base_seed"] = str(args.seed)
    if args.steps is not None:
        overrides["run.n_steps"] = str(args.steps)
    if args.suite is not None:
        overrides["run.suites"] = args.suite
    try:
        text = PRESETS[args.preset] if args.preset else args.config.read_text()
        cfg = parse_config(text, overrides)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    report = run(cfg)
    emit_reports(report, args.out)
    sys.stdout.write(summary_line(report))
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
