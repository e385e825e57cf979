"""Command line entry point: run / eoc / validate subcommands.

Exit status: 0 success, 1 validation failure, 2 solver or configuration
failure, 3 non-finite-field abort.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import build_eoc_config, build_run_config, load_pairs
from .linalg import SolverError
from .output import validate_energy_csv
from .run import NanAbort, format_eoc_table, run, run_eoc, write_eoc_csv

EXIT_OK = 0
EXIT_VALIDATE = 1
EXIT_SOLVER = 2
EXIT_NAN = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vpsep",
        description="Energy-stable solvers for viscoelastic polymer-solvent "
                    "phase separation on a periodic staggered grid.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="advance one configured trajectory")
    run_p.add_argument("config", help="flat key=value configuration file")
    run_p.add_argument("--out-dir", help="override output.out_dir")
    run_p.add_argument("--seed", type=int, help="override init.seed")
    run_p.add_argument("--steps", type=int, help="override n_steps")
    run_p.add_argument("--quiet", action="store_true",
                       help="suppress progress output")

    eoc_p = sub.add_parser("eoc", help="time-refinement convergence study")
    eoc_p.add_argument("config", help="configuration with eoc.* keys")
    eoc_p.add_argument("--out-dir", help="override output.out_dir")
    eoc_p.add_argument("--seed", type=int, help="override init.seed")
    eoc_p.add_argument("--quiet", action="store_true",
                       help="suppress progress output")

    val_p = sub.add_parser("validate",
                           help="check an energy series for monotone decay")
    val_p.add_argument("csv", help="energy.csv produced by a run")
    val_p.add_argument("--rel-tol", type=float, default=1e-10,
                       help="relative tolerance per step (default 1e-10)")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, str]:
    over: dict[str, str] = {}
    if getattr(args, "out_dir", None):
        over["output.out_dir"] = args.out_dir
    if getattr(args, "seed", None) is not None:
        over["init.seed"] = str(args.seed)
    if getattr(args, "steps", None) is not None:
        over["n_steps"] = str(args.steps)
    return over


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = build_run_config(load_pairs(args.config), _overrides(args))
    summary = run(cfg, quiet=args.quiet)
    if not args.quiet:
        print(f"completed {summary.steps_completed} steps in "
              f"{summary.wall_time:.2f}s")
        print(f"energy series: {summary.energy_path}")
        print(f"final snapshot: {summary.final_snapshot_path}")
    return EXIT_OK


def _cmd_eoc(args: argparse.Namespace) -> int:
    eoc = build_eoc_config(load_pairs(args.config), _overrides(args))
    rows = run_eoc(eoc, quiet=args.quiet)
    out_dir = eoc.base.out_dir
    os.makedirs(out_dir, exist_ok=True)
    table_path = os.path.join(out_dir, "eoc.csv")
    write_eoc_csv(rows, table_path)
    print(format_eoc_table(rows))
    if not args.quiet:
        print(f"table written to {table_path}")
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    ok, message = validate_energy_csv(args.csv, rel_tol=args.rel_tol)
    print(f"{args.csv}: {message}")
    return EXIT_OK if ok else EXIT_VALIDATE


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "eoc":
            return _cmd_eoc(args)
        return _cmd_validate(args)
    except NanAbort as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_NAN
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    raise SystemExit(main())
