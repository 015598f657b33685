"""``tron`` command line: run experiments, render plots, report sparsity.

Exit codes: 0 success, 2 usage error, 3 solver abort.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from ..report import SolverAbort
from .config import EXPERIMENTS, ConfigError, load_config
from .sparsity import MalformedCsv, sparsity_report

EXIT_OK, EXIT_USAGE, EXIT_ABORT = 0, 2, 3

log = logging.getLogger("tron")


def _solver_list(text: str):
    return tuple(s.strip() for s in text.split(",") if s.strip())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tron", description="Adaptive-smoothing solvers and their benchmarks.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment and write CSVs, a manifest and plots")
    r.add_argument("experiment", choices=EXPERIMENTS)
    r.add_argument("--solvers", type=_solver_list, help="comma-separated subset, e.g. tron,ilqr")
    r.add_argument("--seed", type=int)
    r.add_argument("--iters", type=int, help="outer iteration budget shared by all solvers")
    r.add_argument("--eta", type=float, help="initial (or constant) smoothing level")
    r.add_argument("--eta-decay", type=float, help="geometric decay rate of eta; omit for the config's choice")
    r.add_argument("--constant-eta", action="store_true", help="force a constant smoothing level")
    r.add_argument("--alpha", type=float, help="satellite L1 weight")
    r.add_argument("--config", help="JSON file overriding the shipped defaults")
    r.add_argument("--out", help="output directory (default runs/<experiment>)")
    r.add_argument("--jobs", type=int, default=1, help="run solvers in this many processes")
    r.add_argument("--deterministic", action="store_true", help="write wall_s as 0 so every CSV is reproducible byte for byte")
    r.add_argument("--no-plots", action="store_true")

    pl = sub.add_parser("plot", help="render SVG figures from an existing run directory")
    pl.add_argument("dir")

    sp = sub.add_parser("sparsity", help="fraction of near-zero control entries in trajectory CSVs")
    sp.add_argument("csv", nargs="+")
    sp.add_argument("--threshold", type=float, help="absolute threshold (default: 1e-3 of each column's max)")
    sp.add_argument("--columns", type=_solver_list, help="control columns to report, e.g. u_1")
    return p


def _cmd_run(args) -> int:
    from .runner import run_experiment

    cfg = load_config(args.experiment, args.config)
    model = None
    if args.alpha is not None:
        if cfg.experiment != "satellite":
            raise ConfigError("--alpha only applies to the satellite experiment")
        model = {"alpha": args.alpha}
    cfg = cfg.with_overrides(solvers=args.solvers, seed=args.seed, iters=args.iters, eta=args.eta,
                             eta_decay=args.eta_decay, model=model)
    if args.constant_eta:
        cfg = dataclasses.replace(cfg, eta_decay=None)
    if args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    out = args.out or os.path.join("runs", cfg.experiment)
    if not cfg.solvers:
        log.warning("empty solver set: nothing to run, no plots written")
    art = run_experiment(cfg, out, deterministic=args.deterministic, jobs=args.jobs, plots=not args.no_plots)
    for s, path in art.convergence.items():
        out_rep = art.outcomes[s].report
        print(f"{s:12s} final cost {out_rep.final_cost:.10g}  ({out_rep.iterations()} iterations)  {path}")
    for s, msg in art.aborted.items():
        print(f"{s:12s} ABORTED: {msg}", file=sys.stderr)
    return EXIT_OK if art.ok else EXIT_ABORT


def _cmd_plot(args) -> int:
    from .plots import emit_plots

    if not os.path.isdir(args.dir):
        raise ConfigError(f"not a directory: {args.dir}")
    paths = emit_plots(args.dir)
    if not paths:
        log.warning("no solver results in %s: no plots written", args.dir)
    for p in paths:
        print(p)
    return EXIT_OK


def _cmd_sparsity(args) -> int:
    print("solver,column,threshold,fraction,steps")
    for path in args.csv:
        for r in sparsity_report(path, args.threshold, args.columns):
            print(f"{r.solver},{r.column},{r.threshold!r},{r.fraction!r},{r.steps}")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"run": _cmd_run, "plot": _cmd_plot, "sparsity": _cmd_sparsity}[args.command]
    try:
        return handler(args)
    except (ConfigError, MalformedCsv, FileNotFoundError) as e:
        print(f"tron {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SolverAbort as e:
        print(f"tron {args.command}: solver aborted: {e}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
