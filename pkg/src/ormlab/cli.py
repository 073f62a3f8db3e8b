"""Command line entry point: ``ormlab estimate|cool|sweep|verify --config <path>``."""

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import COMMANDS, ConfigError, load_config
from .errors import ValidationError
from .experiments import _jsonable, build_id, csv_text, execute

log = logging.getLogger("ormlab")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ormlab", description="Randomized-measurement estimators of Tr(O rho^2).")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", help="CSV output path; a .json sidecar is written next to it")
    p.add_argument("--threads", type=int, help="worker processes for grid points")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def write_outputs(out: Path, result, cfg, wall: float) -> None:
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(csv_text(result.header, result.rows).encode())
    sidecar = {
        "config": cfg.to_dict(),
        "build_id": build_id(),
        "wall_clock_seconds": wall,
        "ok": result.ok,
        "raw": _jsonable(result.raw),
    }
    out.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, default=str, allow_nan=False) + "\n")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, command=args.command, seed=args.seed, threads=args.threads, output=args.out)
        if cfg.command != args.command:
            raise ConfigError("command", f"config says {cfg.command!r} but {args.command!r} was requested")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        result, wall = execute(cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = csv_text(result.header, result.rows)
    if cfg.output:
        write_outputs(Path(cfg.output), result, cfg, wall)
        log.info("wrote %s (%.1f s)", cfg.output, wall)
    else:
        sys.stdout.write(text)
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit(main())
