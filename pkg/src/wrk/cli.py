"""Command-line entry point.

Every subcommand takes one JSON config (``--config``), which may also be a
previously written ``manifest.json`` to re-run that exact experiment.  Errors
leave a one-line JSON document on stderr and map to stable exit codes:
2 config, 3 numerical, 4 I/O.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import harness
from .errors import ConfigError, NumericalError
from .potential import PotentialError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

_HELP = {
    "simulate": "run the exact two-type jump-process simulator",
    "solve-kinetic": "integrate the nonlocal kinetic equations on a torus grid",
    "equilibria": "roots and linear classification of the reduced dynamics",
    "phase-portrait": "trajectory bundle over a grid of initial densities",
    "bifurcation-scan": "root structure along a sweep of the control parameter",
    "lp-converge": "replica experiment: rescaled dynamics vs kinetic solution",
    "verify-identities": "randomized checks of the configuration-space identities",
}

_NO_SEED = ("solve-kinetic", "equilibria", "phase-portrait", "bifurcation-scan")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wrk",
        description="Two-type birth-and-death dynamics: simulation, kinetic "
                    "limit, and stationary analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in harness.COMMANDS:
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", required=True,
                       help="JSON run config, or a manifest.json to re-run")
        p.add_argument("--out",
                       help="output directory (default: config out_dir, then "
                            "$WRK_OUT, then ./wrk_out)")
        p.add_argument("--seed", type=int,
                       help="override the config's master seed")
        p.add_argument("--threads", type=int, default=1,
                       help="parallelism budget for replica runs (default 1)")
    return parser


def _fail(code: int, kind: str, message: str, path=()) -> int:
    doc = {"error": {"exit_code": code, "kind": kind, "message": message,
                     "path": [str(p) for p in path]}}
    print(json.dumps(doc), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = harness.load_json(args.config)
        cfg = harness.config_from_payload(raw)
        if cfg.get("command") != args.command:
            raise ConfigError(
                f"config is for command {cfg.get('command')!r}, "
                f"invoked as {args.command!r}",
                path=("command",),
            )
        if args.seed is not None:
            if args.command in _NO_SEED:
                raise ConfigError(f"--seed does not apply to {args.command!r}")
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must fit in 64 bits")
            section = "identities" if args.command == "verify-identities" else "simulation"
            cfg.setdefault(section, {})["seed"] = args.seed
        out_dir = (args.out or cfg.get("out_dir")
                   or os.environ.get("WRK_OUT") or "wrk_out")
        result = harness.execute(cfg, out_dir, threads=args.threads)
        print(json.dumps({
            "status": "ok",
            "command": args.command,
            "out_dir": result.out_dir,
            "files": result.files + ["manifest.json"],
        }))
        return EXIT_OK
    except (ConfigError, PotentialError) as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), getattr(exc, "path", ()))
    except NumericalError as exc:
        return _fail(EXIT_NUMERICAL, "numerical", str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
