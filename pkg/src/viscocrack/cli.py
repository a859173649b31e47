"""Command line front end: ``viscocrack run`` and ``viscocrack validate``."""
from __future__ import annotations

import argparse
import logging
import sys
import warnings

from .scenarios import ConfigError, compare_to_exact, parse_config, run_scenario  # noqa: F401

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="viscocrack",
                                description="Viscoelastic dynamics on a domain with a growing crack.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario and write ledgers and summary")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True, help="output directory (created if missing)")
    r.add_argument("--snapshots", type=int, default=None,
                   help="number of VTK field snapshots (overrides the config)")
    v = sub.add_parser("validate", help="parse and validate a config without running")
    v.add_argument("--config", required=True)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        try:
            spec = parse_config(args.config)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if args.command == "validate":
        print(f"{args.config}: ok (scenario {spec.scenario})")
        return EXIT_OK
    if args.snapshots is not None:
        if args.snapshots < 0:
            print("config error: --snapshots must be >= 0", file=sys.stderr)
            return EXIT_VALIDATION
        spec.snapshots = args.snapshots
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            status = run_scenario(spec, args.out)
    except Exception as exc:  # noqa: BLE001 - any failure maps to the runtime exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote results to {args.out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
