"""Command line entry point: ``mdinew run|validate|list-scenarios``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import SCENARIOS, load_config
from .emit import emit
from .errors import ConfigError
from .scenarios import run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdinew", description="MDI nonlinear entanglement witness experiments")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario config")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", default=None, help="output path (default: config 'out', else stdout)")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    val = sub.add_parser("validate", help="parse and validate a config without running it")
    val.add_argument("--config", required=True)
    sub.add_parser("list-scenarios", help="list registered scenarios")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list-scenarios":
        for name, doc in SCENARIOS.items():
            print(f"{name:22s} {doc}")
        return EXIT_OK
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.command == "validate":
        print(f"ok: {cfg.scenario}")
        return EXIT_OK
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            print("config error: seed must be an unsigned 64-bit integer", file=sys.stderr)
            return EXIT_CONFIG
        cfg = replace(cfg, seed=args.seed)
    result = run_scenario(cfg)
    out = args.out if args.out is not None else (str(cfg.resolve(cfg.out)) if cfg.out else None)
    try:
        text = emit(result.records, result.columns, args.format, out)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    if out is None:
        sys.stdout.write(text)
    summary = ", ".join(f"{k}={v}" for k, v in result.summary.items())
    print(f"{cfg.scenario}: {len(result.records)} rows; {summary}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
