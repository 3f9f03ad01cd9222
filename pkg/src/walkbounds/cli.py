"""``walkbounds`` command-line entry point.

Exit codes: 0 success, 2 usage or config error, 3 premise failure,
4 consistency failure (a verified bound or inequality did not hold).
"""

import argparse
import os
from pathlib import Path
import sys

from . import __version__
from .config import COMMANDS, load_config, materialize
from .errors import ConfigError, DisconnectedGraphError, PremiseViolation
from .experiments import RUNNERS
from .report import dumps, write_csv, write_json

EXIT_OK, EXIT_USAGE, EXIT_PREMISE, EXIT_CONSISTENCY = 0, 2, 3, 4
OUT_ENV = "WALKBOUNDS_OUT"
STATUS_CODES = {"ok": EXIT_OK, "premise-failure": EXIT_PREMISE, "consistency-failure": EXIT_CONSISTENCY}


def build_parser():
    ap = argparse.ArgumentParser(prog="walkbounds", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"walkbounds {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="JSON config; omitted fields take documented defaults")
    ap.add_argument("--out", type=Path, help=f"output directory (default: ${OUT_ENV} or ./walkbounds-out)")
    ap.add_argument("--seed", type=int, help="overrides the config seed")
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                    help="worker processes for tail-audit (default: logical cores)")
    ap.add_argument("--mode", choices=("graph-exact", "manifold-derived"),
                    help="tail-audit evaluation mode for every plan entry")
    return ap


def _out_dir(arg):
    if arg is not None:
        return arg
    return Path(os.environ.get(OUT_ENV, "walkbounds-out"))


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config, args.command) if args.config else materialize(args.command)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            cfg = materialize(args.command, {**cfg, "seed": args.seed})
        if args.mode is not None:
            if args.command != "tail-audit":
                raise ConfigError("--mode applies to tail-audit only")
            cfg = materialize(args.command, {**cfg, "modes": [args.mode]})
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
    except ConfigError as exc:
        print(f"walkbounds: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(dumps({"command": args.command, "version": __version__, "config": cfg}),
                                     encoding="utf-8")
    stem = args.command.replace("-", "_")
    try:
        if args.command == "tail-audit":
            outcome = RUNNERS[args.command](cfg, args.workers, out / "entries")
        else:
            outcome = RUNNERS[args.command](cfg)
    except (PremiseViolation, DisconnectedGraphError) as exc:
        print(f"walkbounds: premise failure: {exc}", file=sys.stderr)
        return EXIT_PREMISE

    write_json(out / f"{stem}.json", {"status": outcome.status, **outcome.payload}, cfg)
    for name, (header, rows) in outcome.tables.items():
        write_csv(out / f"{stem}_{name}.csv", header, rows, cfg)
    print(f"walkbounds {args.command} ({outcome.status})")
    for line in outcome.lines:
        print(line)
    print(f"artifacts: {out}")
    return STATUS_CODES[outcome.status]


if __name__ == "__main__":
    sys.exit(main())
