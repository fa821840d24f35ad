"""``qattest <command> --config FILE --seed N --out DIR [--trials N] [--workers N]``.

Exit status is 0 when every check of the command held, 2 when at least one
failed (details in ``summary.json`` and on stderr), 1 on bad input.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .experiments import COMMANDS, ExperimentConfig

log = logging.getLogger("qattest")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qattest", description="Run quantum attestation experiments.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="flat YAML key-value file")
    ap.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides the config)")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--trials", type=int, help="trial count (overrides the config)")
    ap.add_argument("--workers", type=int, help="worker processes for trial fan-out")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        overrides = {
            k: v
            for k, v in {"seed": args.seed, "out": args.out, "trials": args.trials, "workers": args.workers}.items()
            if v is not None
        }
        cfg = replace(cfg, experiment=args.command, **overrides).validate()
    except (OSError, ValueError, TypeError) as exc:
        print(f"qattest: {exc}", file=sys.stderr)
        return 1

    log.info("running %s with seed %d into %s", args.command, cfg.seed, cfg.out)
    result = COMMANDS[args.command](cfg)
    result.write(cfg.out, cfg)
    for v in result.violations:
        print(f"check failed: {v}", file=sys.stderr)
    return 2 if result.violations else 0


if __name__ == "__main__":
    sys.exit(main())
