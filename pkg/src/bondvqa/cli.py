"""Command-line entry point: ``bondvqa {generate,run,compare,brute-force}``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import add_config_flags, config_from_args
from .experiment import cmd_brute_force, cmd_compare, cmd_generate, cmd_run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bondvqa", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic instance file")
    p.add_argument("-o", "--out", required=True, help="instance JSON path")
    add_config_flags(p)

    p = sub.add_parser("run", help="train, polish and write a run directory")
    p.add_argument("-o", "--out", required=True, help="run directory")
    add_config_flags(p)

    p = sub.add_parser("compare", help="equal-budget local-search comparison for a finished run")
    p.add_argument("run_dir")
    p.add_argument("--budget", type=int, default=None,
                   help="cost evaluations per method (default: trained polishing budget)")

    p = sub.add_parser("brute-force", help="exhaustive optimum (n <= 22)")
    p.add_argument("-o", "--out", default=None, help="optional JSON output")
    add_config_flags(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "compare":
            cmd_compare(args.run_dir, args.budget)
            return 0
        config = config_from_args(args)
        if args.command == "generate":
            cmd_generate(config, args.out)
        elif args.command == "run":
            cmd_run(config, args.out)
        elif args.command == "brute-force":
            cmd_brute_force(config, args.out)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
