"""Command-line entry point.

Exit codes: 0 pass, 1 verification failure, 2 usage or configuration error,
3 numerical divergence (partial output is still written).
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .errors import CdistabError, ConfigError, DivergenceError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdistab",
        description="Simulate and verify the saturated-feedback stabilization "
                    "construction for the 4-state oscillatory chain.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")

    common(sub.add_parser("simulate", help="integrate one system and export CSV"))

    p_verify = sub.add_parser("verify", help="run a verification suite")
    from .harness import SUITE_NAMES

    p_verify.add_argument("suite", choices=SUITE_NAMES + ("all",))
    common(p_verify)

    common(sub.add_parser("sweep", help="grid of decrease checks over (eps, rho, R)"))
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    from .config import load_config
    from .harness import cmd_simulate, cmd_sweep, cmd_verify

    try:
        cfg = load_config(args.config, seed_override=args.seed, out_override=args.out)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.suite)
        return cmd_sweep(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 3
    except CdistabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
