"""Command-line front end for the experiment pipelines.

Subcommands: solve-hjb, simulate, convergence, verify-passivity,
counterexample.  Configuration is a flat key=value file (``--config``) with
command-line overrides layered on top: repeated ``--set key=value`` entries
first, then the dedicated flags.  Exit codes: 0 success, 2 configuration
error, 3 numerical failure (a machine-readable error record is written next
to the artifacts), 4 failed acceptance checks under ``--check``.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

from . import experiments
from .errors import ConfigurationError, HjbpassError
from .io import write_manifest

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4

_COMMANDS = {
    "solve-hjb": (
        experiments.run_solve_hjb,
        "solve the stationary optimality equation and write the value function",
    ),
    "simulate": (
        experiments.run_simulate,
        "simulate the uncontrolled plant and the selected closed loops",
    ),
    "convergence": (
        experiments.run_convergence,
        "measure the order of the discrete-gradient scheme against a fine reference",
    ),
    "verify-passivity": (
        experiments.run_verify_passivity,
        "audit unforced controller runs: power balance and storage decay",
    ),
    "counterexample": (
        experiments.run_counterexample,
        "print the summed-storage indefiniteness witness",
    ),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hjbpass",
        description="Passive output-feedback synthesis experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in _COMMANDS.items():
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--preset", help="named plant preset")
        sp.add_argument("--out", help="output directory for artifacts")
        sp.add_argument("--seed", type=int, help="run seed recorded in the manifest")
        sp.add_argument("--degree", type=int, help="basis degree per axis")
        sp.add_argument("--config", help="flat key=value configuration file")
        sp.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override one config key (repeatable)",
        )
        sp.add_argument(
            "--check",
            action="store_true",
            help="evaluate acceptance checks; exit 4 if any fail",
        )
    return parser


def _build_mapping(args: argparse.Namespace) -> dict:
    mapping: dict = {}
    if args.config is not None:
        mapping.update(experiments.parse_config_file(args.config))
    for item in args.overrides:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        mapping[key] = value.strip()
    for key in ("preset", "out", "seed", "degree"):
        value = getattr(args, key)
        if value is not None:
            mapping[key] = value if isinstance(value, str) else str(value)
    return mapping


def _error_record_path(cfg: experiments.ExperimentConfig, command: str) -> str:
    base = cfg.out if cfg.out is not None else "artifacts"
    return os.path.join(base, f"{command}-error.json")


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command

    try:
        mapping = _build_mapping(args)
        cfg = experiments.ExperimentConfig.from_mapping(mapping)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    runner = _COMMANDS[command][0]
    try:
        result = runner(cfg)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HjbpassError as exc:
        record = {
            "command": command,
            "error": {
                "type": type(exc).__name__,
                "message": str(exc),
                "step_index": getattr(exc, "step_index", None),
                "partial_trajectory": getattr(exc, "partial_path", None),
            },
        }
        try:
            write_manifest(_error_record_path(cfg, command), record)
        except OSError:
            pass
        print(f"numerical failure: {exc}", file=sys.stderr)
        partial = getattr(exc, "partial_path", None)
        if partial is not None:
            print(f"partial trajectory flushed to {partial}", file=sys.stderr)
        return EXIT_NUMERICAL

    for line in result.summary_lines:
        print(line)
    print(f"artifacts in {result.out_dir}")

    if args.check:
        for check in result.checks:
            status = "PASS" if check.passed else "FAIL"
            print(f"CHECK {check.name}: {status} ({check.detail})")
        if not result.checks_passed:
            return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
