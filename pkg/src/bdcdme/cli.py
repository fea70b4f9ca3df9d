"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 validation failure,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from numpy.linalg import LinAlgError

from . import runner
from .config import ConfigError, load_config
from .errors import CdmeError

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--scenario", help="constant | dirac0 | dirac-half | smooth")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads for simulation")
    common.add_argument("--n-trunc", type=int, help="number of eigenmodes")
    common.add_argument("--grid", type=int, help="spatial grid points")

    p = argparse.ArgumentParser(prog="bdcdme", description="Birth-death CDME solver and validation suite.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="write rho0, rho1 and rho2 tables")
    val = sub.add_parser("validate", parents=[common], help="run the property suite")
    val.add_argument("--corrupt-alpha", type=float, help=argparse.SUPPRESS)
    sub.add_parser("simulate", parents=[common], help="particle simulation vs analytic solution")
    sub.add_parser("convergence", parents=[common], help="truncation convergence table")
    sub.add_parser("compare", parents=[common], help="spectral vs finite-difference distances")
    return p


def _overrides(args):
    out = {}
    if args.out is not None:
        out["out"] = args.out
    if args.seed is not None:
        out["seed"] = args.seed
    solver = {}
    if args.n_trunc is not None:
        solver["n_trunc"] = args.n_trunc
    if args.grid is not None:
        solver["grid"] = args.grid
    if solver:
        out["solver"] = solver
    return out


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.scenario, _overrides(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "solve":
            paths, summary = runner.run_solve(cfg)
            for line in summary:
                print(line)
            for name, path in paths.items():
                print(f"wrote {name}: {path}")
        elif args.command == "validate":
            checks = runner.run_validate(cfg, alpha_scale=args.corrupt_alpha, out_dir=cfg["out"])
            failed = [c for c in checks if not c.passed]
            for c in checks:
                status = "PASS" if c.passed else "FAIL"
                print(f"{status}  {c.name:<32} value={c.value:.3e}  tol={c.tolerance:.3e}  {c.detail}")
            if failed:
                print(f"validation failed: {', '.join(c.name for c in failed)}", file=sys.stderr)
                return EXIT_VALIDATION
        elif args.command == "simulate":
            paths, _, report = runner.run_simulate(cfg, threads=args.threads)
            for s in report.snapshots:
                print(f"t={s.t:g}  tv={s.tv:.4f} (<= {s.tv_threshold:.4f})  chi2 p={s.p_value:.3g}")
            for name, path in paths.items():
                print(f"wrote {name}: {path}")
        elif args.command == "convergence":
            path, rows = runner.run_convergence(cfg)
            for n, diff, coef in rows:
                print(f"N={n:<4d} ||v_N - v_2N|| = {diff:.4e}")
            print(f"wrote convergence: {path}")
        elif args.command == "compare":
            path, rows = runner.run_compare(cfg)
            for w, d in rows:
                print(f"width={'none' if w is None else f'{w:g}'}  linf={d:.4e}")
            print(f"wrote compare: {path}")
    except (CdmeError, LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
