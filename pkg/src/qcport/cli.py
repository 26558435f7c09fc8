"""Command-line entry point: solve, frontier, verify, gen."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .errors import (DimensionMismatch, NotConvexMeasure, ParseError, QCPortError,
                     UnsupportedMeasure, ValidationError)
from .report import (EXIT_SOLVER, EXIT_VALIDATION, MODES, RunConfig, cmd_frontier, cmd_solve,
                     cmd_verify, frontier_csv, to_json, write_output)
from .scenarios import generate_synthetic, save_scenarios

_VALIDATION = (ValidationError, ParseError, DimensionMismatch, NotConvexMeasure, UnsupportedMeasure)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qcport",
                                 description="Portfolio selection under quasiconvex risk measures")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="run configuration (JSON)")
        p.add_argument("--out", default=None, help="output file, '-' for stdout")
        p.add_argument("--mode", choices=MODES, default=None)
        p.add_argument("--r", type=float, default=None, help="constraint threshold")
        p.add_argument("--epsilon", type=float, default=None, help="bisection tolerance")
        p.add_argument("--seed", type=int, default=None)

    common(sub.add_parser("solve", help="solve one problem"))
    fr = sub.add_parser("frontier", help="sweep the threshold r")
    common(fr)
    fr.add_argument("--r-min", type=float, required=True)
    fr.add_argument("--r-max", type=float, required=True)
    fr.add_argument("--steps", type=int, default=11)
    common(sub.add_parser("verify", help="cross-check solver, oracle and penalties"))

    gen = sub.add_parser("gen", help="write synthetic scenarios as CSV")
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    return ap


def _load(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    overrides = {}
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.r is not None:
        overrides["r"] = args.r
    if args.epsilon is not None:
        overrides["epsilon"] = args.epsilon
    if args.seed is not None:
        overrides["seed"] = args.seed
        if cfg.synthetic is not None:
            overrides["synthetic"] = {**cfg.synthetic, "seed": args.seed}
    if args.out is not None:
        overrides["output"] = args.out
    return replace(cfg, **overrides) if overrides else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            save_scenarios(generate_synthetic(args.m, args.n, args.seed), args.out)
            return 0
        cfg = _load(args)
        if args.command == "solve":
            rep, code = cmd_solve(cfg)
            write_output(to_json(rep), cfg.output)
        elif args.command == "frontier":
            table, code = cmd_frontier(cfg, args.r_min, args.r_max, args.steps)
            text = frontier_csv(table) if str(cfg.output).endswith(".csv") else to_json(table)
            write_output(text, cfg.output)
            for w in table["warnings"]:
                print(f"warning: {w}", file=sys.stderr)
        else:
            rep, code = cmd_verify(cfg)
            write_output(to_json(rep), cfg.output)
        return code
    except _VALIDATION as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except QCPortError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
