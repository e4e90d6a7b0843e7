"""Command line entry point: ``trustfl run | verify | dump-defaults``.

Exit codes: 0 success, 1 config error, 2 runtime error, 3 verification mismatch.
"""

import argparse
import dataclasses
import json
import logging
import sys

from .chain import ChainError
from .harness import ConfigError, default_profile, load_config, run_scenario, verify_dir

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_MISMATCH = 0, 1, 2, 3


def _run(args) -> int:
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = dataclasses.replace(config, seed=args.seed)
        if args.rounds is not None:
            if args.rounds < 0:
                raise ConfigError("--rounds must be >= 0")
            config = dataclasses.replace(config, rounds=args.rounds)
        out = args.out or config.output.dir
        if out is None:
            raise ConfigError("no output directory: pass --out or set output.dir")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        run = run_scenario(config, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ChainError, OSError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    loss = run.coordinator.validation_loss()
    print(f"{config.rounds} rounds, final validation loss {loss:.6g}, artifacts in {out}")
    return EXIT_OK


def _verify(args) -> int:
    try:
        result = verify_dir(args.dir)
    except (OSError, ValueError) as exc:
        print(f"cannot read {args.dir}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for line in result.mismatches:
        print(f"MISMATCH {line}")
    print(f"{result.rounds_checked} rounds checked, {len(result.mismatches)} mismatches")
    return EXIT_OK if result.ok else EXIT_MISMATCH


def _dump(args) -> int:
    print(json.dumps(default_profile(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trustfl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write its artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_run)

    p = sub.add_parser("verify", help="recompute digests from a run directory")
    p.add_argument("dir")
    p.set_defaults(func=_verify)

    p = sub.add_parser("dump-defaults", help="print the built-in default profile")
    p.set_defaults(func=_dump)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
