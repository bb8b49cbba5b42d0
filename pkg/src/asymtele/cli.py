"""``asymtele`` command line: run, validate and list scenarios."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config, serialize_config, with_overrides

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _error(record: dict) -> None:
    print(json.dumps({"error": record}, sort_keys=True), file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asymtele", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the scenario described by a config file")
    run.add_argument("config", type=Path)
    run.add_argument("--out", type=Path, default=None, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--quiet", action="store_true")
    sub.add_parser("scenarios", help="list scenario names")
    val = sub.add_parser("validate", help="check a config and print it with defaults")
    val.add_argument("config", type=Path)
    return parser


def _load(path: Path):
    try:
        return load_config(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "scenarios":
        from .scenarios import list_scenarios

        print(list_scenarios())
        return EXIT_OK
    try:
        config = _load(args.config)
        if args.command == "validate":
            print(serialize_config(config), end="")
            return EXIT_OK
        config = with_overrides(config, seed=args.seed, output_dir=args.out)
    except ConfigError as exc:
        _error(exc.record())
        return EXIT_CONFIG

    from .scenarios import run_scenario

    try:
        report = run_scenario(config)
        written = report.write(config.output_dir)
    except Exception as exc:  # surfaced as a machine-readable record
        _error({"type": "runtime", "exception": type(exc).__name__, "message": str(exc),
                "scenario": config.scenario})
        return EXIT_RUNTIME
    if not args.quiet:
        for path in written:
            print(path)
    return EXIT_OK
