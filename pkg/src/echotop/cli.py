"""Command-line entry point: ``echotop <mode> [--config FILE] [--key value ...]``.

Exit codes: 0 success, 2 configuration error, 3 resource guard refusal.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .errors import ConfigError, ResourceRefused
from .experiment import (
    MODES,
    OUTPUT_ENV,
    PRESETS,
    ExperimentConfig,
    make_config,
    parse_config_text,
    run,
    run_preset,
)

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE = 0, 2, 3


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="flat key=value file; flags override its entries")
    for f in dataclasses.fields(ExperimentConfig):
        if f.name == "mode":
            continue
        kind = str(f.type)
        if kind == "bool":
            p.add_argument(f"--{f.name}", action="store_const", const=True, default=None)
        else:
            p.add_argument(f"--{f.name}", default=None, metavar=f.name.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echotop",
        description=f"Fidelity decay of the kicked top. Output directory defaults to ${OUTPUT_ENV}.")
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in MODES:
        _add_config_flags(sub.add_parser(mode, help=f"{mode} run"))
    pp = sub.add_parser("preset", help="run a figure preset")
    pp.add_argument("name", choices=sorted(PRESETS))
    _add_config_flags(pp)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(ExperimentConfig)
                 if f.name != "mode" and getattr(args, f.name, None) is not None}
    try:
        file_values = parse_config_text(args.config.read_text()) if args.config else {}
        if args.command == "preset":
            paths = run_preset(args.name, {**file_values, **overrides})
        else:
            file_values["mode"] = args.command
            paths = run(make_config(file_values, overrides))
    except ConfigError as exc:
        print(f"echotop: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceRefused as exc:
        print(f"echotop: refused: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except OSError as exc:
        print(f"echotop: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name in sorted(paths):
        print(paths[name])
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
