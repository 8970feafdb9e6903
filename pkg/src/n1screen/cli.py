"""Command-line driver: read a network, solve the base case, screen outages, write reports."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .contingency import (
    BaseCaseDiverged,
    InvalidNetwork,
    ScreeningOptions,
    UnknownBranchInFilter,
    enumerate_scenarios,
    prepare_base,
    screen_all,
    screen_scenario,
)
from .fdpf import CgOptions, FdpfOptions, Mode
from .graph import build_graph
from .ingest import NetworkFormatError, load_network
from .linalg import PrecondKind
from .report import summary_line, write_csv, write_json

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_USAGE = 2
EXIT_BASE_DIVERGED = 3

PRECONDS = {
    "none": PrecondKind.IDENTITY,
    "jacobi": PrecondKind.JACOBI,
    "ilu0-base": PrecondKind.ILU0,
    "lu-base": PrecondKind.FULL_LU,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _branch_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated branch ids, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="n1screen", description="N-1 branch outage screening with fast-decoupled power flow.")
    p.add_argument("--input", required=True, metavar="PATH", help="network file (IEEE CDF or JSON)")
    p.add_argument("--format", choices=("cdf", "json"), help="input format (default: by extension)")
    p.add_argument("--solver", choices=("gpcg", "lud"), default="gpcg")
    p.add_argument("--precond", choices=tuple(PRECONDS), default=None,
                   help="preconditioner for the gpcg solver (default: lu-base)")
    p.add_argument("--mode", choices=("full", "quick"), default="full")
    p.add_argument("--tol-mismatch", type=float, default=1e-3, metavar="F")
    p.add_argument("--tol-cg", type=float, default=1e-8, metavar="F")
    p.add_argument("--max-outer", type=int, default=50, metavar="N")
    p.add_argument("--max-cg", type=int, default=None, metavar="N", help="CG iteration cap (default: 2n)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, metavar="N")
    p.add_argument("--branches", type=_branch_list, default=None, metavar="LIST",
                   help="comma-separated branch ids to screen (default: all in service)")
    p.add_argument("--output", metavar="PATH", help="report path; with --emit both, the suffix is replaced")
    p.add_argument("--emit", choices=("csv", "json", "both"), default="csv")
    p.add_argument("--zero-times", action="store_true", help="write all timing fields as 0")
    p.add_argument("--dump-graph", metavar="PATH", help="write the built graph as JSON")
    p.add_argument("--trace", action="store_true",
                   help="with a single branch in --branches, print every half-step mismatch to stderr")
    return p


def _options(args) -> ScreeningOptions:
    kind = PRECONDS[args.precond or "lu-base"]
    cg = CgOptions(tol=args.tol_cg, max_iter=args.max_cg, precond=kind)
    fd = FdpfOptions(mismatch_tol=args.tol_mismatch, max_outer=args.max_outer, mode=Mode(args.mode), cg=cg)
    return ScreeningOptions(fdpf=fd, solver=args.solver)


def _write_reports(report, args):
    out = Path(args.output)
    targets = []
    if args.emit in ("csv", "both"):
        targets.append((write_csv, out.with_suffix(".csv") if args.emit == "both" else out))
    if args.emit in ("json", "both"):
        targets.append((write_json, out.with_suffix(".json") if args.emit == "both" else out))
    for writer, path in targets:
        writer(report, path)


def _trace(ctx, desc, opts):
    def on_step(half, k, rhs, delta):
        print(f"iter={k} half={half} max_rhs={np.max(np.abs(rhs)):.3e} max_step={np.max(np.abs(delta)):.3e}",
              file=sys.stderr)

    res = screen_scenario(ctx, desc, opts, on_step=on_step)
    print(f"branch={res.branch_id} converged={res.converged} outer={res.outer_iterations} "
          f"cg={res.cg_iterations_total} violations={len(res.violations)} "
          f"failure={res.failure_reason or '-'}", file=sys.stderr)


def run_cli(argv=None) -> int:
    """Parse ``argv`` and run the screening; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if args.jobs < 1:
        parser.print_usage(sys.stderr)
        print("n1screen: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if args.solver == "lud" and args.precond is not None:
        print(f"n1screen: warning: --precond {args.precond} is ignored by the lud solver, "
              "which factorizes every scenario directly", file=sys.stderr)

    try:
        model = load_network(args.input, args.format)
    except (OSError, NetworkFormatError, ValueError) as exc:
        print(f"n1screen: error: cannot read {args.input}: {exc}", file=sys.stderr)
        return EXIT_USAGE

    opts = _options(args)
    try:
        if args.dump_graph:
            Path(args.dump_graph).write_text(build_graph(model).to_json(), encoding="utf-8")
        ctx = prepare_base(model, opts)
    except InvalidNetwork as exc:
        for d in exc.diagnostics:
            print(f"n1screen: error: {d}", file=sys.stderr)
        return EXIT_USAGE
    except BaseCaseDiverged as exc:
        print(f"n1screen: error: {exc}", file=sys.stderr)
        return EXIT_BASE_DIVERGED
    except OSError as exc:
        print(f"n1screen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.trace:
            descs = enumerate_scenarios(ctx, args.branches)
            if len(descs) != 1:
                print("n1screen: error: --trace needs exactly one branch in --branches", file=sys.stderr)
                return EXIT_USAGE
            _trace(ctx, descs[0], opts)
        report = screen_all(ctx, opts, args.jobs, args.branches)
    except UnknownBranchInFilter as exc:
        print(f"n1screen: error: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE

    if args.zero_times:
        report = report.with_zero_times()
    if args.output:
        try:
            _write_reports(report, args)
        except OSError as exc:
            print(f"n1screen: error: cannot write report: {exc}", file=sys.stderr)
            return EXIT_USAGE
    print(summary_line(report))
    return EXIT_OK if report.totals.failed == 0 else EXIT_FAILURES


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run_cli())
