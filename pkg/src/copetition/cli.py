"""``copetition <subcommand> --config <path> [--override key=value]...``"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load
from .pipeline import PIPELINE, STAGES, run

SUBCOMMANDS = tuple(STAGES) + ("pipeline",)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="copetition", description=__doc__)
    ap.add_argument("subcommand", choices=SUBCOMMANDS,
                    help="pipeline runs " + " -> ".join(PIPELINE))
    ap.add_argument("--config", help="YAML or JSON run configuration")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="dotted config key, e.g. filter.actor.quantile=0.1 (repeatable)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load(args.config, args.override)
        run(args.subcommand, cfg)
    except ConfigError as exc:
        print(f"copetition: config error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"copetition: {args.subcommand} failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
