"""Command-line interface.

Subcommands: ``recover`` (solve one instance from files), ``simulate`` (run a
scenario sweep to CSV), ``conditions`` (closed-form recovery thresholds and
constants), ``ric`` (sampled isometry-constant lower bound), ``nsp-check``
(randomized null-space property falsifier).

File conventions: matrices are plain CSV (m rows, comma-separated decimal
columns, no header); vectors are plain text, one decimal number per line.
No environment variables are consulted.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from blocklp.blocks import BlockPattern, BlockVector
from blocklp.conditions import (
    ConditionParams,
    delta_threshold,
    gamma_factor,
    nsp_falsify,
    recovery_constants,
    ric_estimate,
)
from blocklp.harness import load_config, run_sweep
from blocklp.solver import SolverConfig, active_backend, irls_recover

__all__ = ["main"]


def load_matrix(path: str) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))


def load_vector(path: str) -> np.ndarray:
    return np.atleast_1d(np.loadtxt(path, dtype=np.float64))


def save_vector(path: str, values: np.ndarray) -> None:
    np.savetxt(path, np.asarray(values).reshape(-1), fmt="%.17g")


def _sweep_values(raw: str) -> list:
    """Parse a flag value: comma list or start:stop:step range, else scalar."""
    raw = raw.strip()
    if ":" in raw:
        pieces = raw.split(":")
        if len(pieces) != 3:
            raise argparse.ArgumentTypeError(
                f"range values need start:stop:step, got {raw!r}"
            )
        start, stop, step = (float(piece) for piece in pieces)
        if step <= 0:
            raise argparse.ArgumentTypeError("range step must be positive")
        values = []
        index = 0
        while True:
            value = round(start + index * step, 12)
            if value > stop + 1e-12:
                break
            values.append(value)
            index += 1
        return values
    return [float(piece) for piece in raw.split(",") if piece.strip() != ""]


def _cmd_recover(args: argparse.Namespace) -> int:
    A = load_matrix(args.matrix)
    y = load_vector(args.measurements)
    m, N = A.shape
    if N % args.d != 0:
        raise SystemExit(f"block length {args.d} does not divide N = {N}")
    pattern = BlockPattern(N // args.d, args.d)
    if args.weights is not None:
        w = load_vector(args.weights)
    else:
        w = np.ones(pattern.n)
    cfg = SolverConfig(p=args.p, lam=args.lam)
    result = irls_recover(A, y, pattern, w, cfg)
    save_vector(args.out, result.x_hat.values)
    if args.diag is not None:
        with open(args.diag, "w", encoding="utf-8") as handle:
            handle.write(f"iterations={result.iterations}\n")
            handle.write(f"converged={'true' if result.converged else 'false'}\n")
            handle.write(f"final_gamma={result.final_gamma!r}\n")
            handle.write(f"final_step_norm={result.final_step_norm!r}\n")
            handle.write(f"backend={active_backend()}\n")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfgs = load_config(args.config, default_seed=args.seed)
    if not cfgs:
        print("config defines no scenarios; writing a header-only CSV", file=sys.stderr)
    records = run_sweep(cfgs, threads=args.threads, out=args.out, timing=args.timing)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def _cmd_conditions(args: argparse.Namespace) -> int:
    a_vals = [int(v) for v in _sweep_values(args.a)]
    rho_vals = _sweep_values(args.rho)
    alpha_vals = _sweep_values(args.alpha)
    omega_vals = _sweep_values(args.omega)
    p_vals = _sweep_values(args.p)

    have_deltas = args.delta_ak is not None and args.delta_a1k is not None
    want_constants = have_deltas and args.k is not None and args.m is not None

    rows = []
    for a in a_vals:
        for rho in rho_vals:
            for alpha in alpha_vals:
                for omega in omega_vals:
                    for p in p_vals:
                        params = ConditionParams(a=a, rho=rho, alpha=alpha, omega=omega, p=p)
                        row = {
                            "a": a,
                            "rho": rho,
                            "alpha": alpha,
                            "omega": omega,
                            "p": p,
                            "gamma": gamma_factor(params),
                            "delta": delta_threshold(params),
                        }
                        if want_constants:
                            c1, c2 = recovery_constants(
                                args.delta_ak, args.delta_a1k, params, args.k, args.m
                            )
                            row["C1"] = c1
                            row["C2"] = c2
                        rows.append(row)

    if len(rows) == 1:
        row = rows[0]
        print(f"gamma={row['gamma']!r}")
        print(f"delta={row['delta']!r}")
        if want_constants:
            print(f"C1={row['C1']!r}")
            print(f"C2={row['C2']!r}")
    else:
        print(f"{len(rows)} parameter combinations", end="")
        print(f"; grid written to {args.grid_out}" if args.grid_out else " (use --grid-out for the full grid)")

    if args.grid_out:
        columns = ["a", "rho", "alpha", "omega", "p", "gamma", "delta"]
        if want_constants:
            columns += ["C1", "C2"]
        with open(args.grid_out, "w", encoding="utf-8") as handle:
            handle.write(",".join(columns) + "\n")
            for row in rows:
                handle.write(",".join(repr(float(row[c])) for c in columns) + "\n")
    return 0


def _cmd_ric(args: argparse.Namespace) -> int:
    A = load_matrix(args.matrix)
    N = A.shape[1]
    if N % args.d != 0:
        raise SystemExit(f"block length {args.d} does not divide N = {N}")
    pattern = BlockPattern(N // args.d, args.d)
    est = ric_estimate(A, pattern, args.k, args.p, args.samples, args.seed)
    print(f"lower_bound={est.lower_bound!r}")
    print(f"k={est.k}")
    print(f"p={est.p!r}")
    print(f"samples={est.samples}")
    print(f"seed={est.seed}")
    print("note=sampled lower bound on the isometry constant, not an exact value")
    if args.witness_out:
        save_vector(args.witness_out, est.witness)
    return 0


def _cmd_nsp_check(args: argparse.Namespace) -> int:
    A = load_matrix(args.matrix)
    N = A.shape[1]
    if N % args.d != 0:
        raise SystemExit(f"block length {args.d} does not divide N = {N}")
    pattern = BlockPattern(N // args.d, args.d)
    report = nsp_falsify(
        A,
        pattern,
        k=args.k,
        s=args.s,
        omega=args.omega,
        p=args.p,
        C=args.C,
        samples=args.samples,
        seed=args.seed,
        null_tol=args.null_tol,
    )
    print(f"violated={'true' if report.violated else 'false'}")
    print(f"samples={report.samples}")
    print(f"seed={report.seed}")
    print(f"note={report.summary()}")
    if report.violated and args.witness_out:
        save_vector(args.witness_out, report.witness.values)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blocklp",
        description="Block-sparse recovery by weighted mixed l2/lp minimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    rec = sub.add_parser("recover", help="recover a signal from measurement files")
    rec.add_argument("--matrix", required=True, help="measurement matrix (CSV, no header)")
    rec.add_argument("--measurements", required=True, help="measurement vector (one value per line)")
    rec.add_argument("--d", required=True, type=int, help="block length")
    rec.add_argument("--p", required=True, type=float, help="mixed-norm exponent in (0, 1]")
    rec.add_argument("--lambda", dest="lam", required=True, type=float, help="ridge level of the inner solves")
    rec.add_argument("--weights", help="optional per-block weight vector file (default: all ones)")
    rec.add_argument("--out", required=True, help="output file for the recovered signal")
    rec.add_argument("--diag", help="optional output file for convergence diagnostics")
    rec.set_defaults(func=_cmd_recover)

    sim = sub.add_parser("simulate", help="run a scenario sweep and write a CSV")
    sim.add_argument("--config", required=True, help="scenario config file")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    sim.add_argument("--seed", type=int, default=0, help="default base seed for sections without one")
    sim.add_argument(
        "--timing",
        action="store_true",
        help="write measured wall_ms (breaks byte-level reproducibility)",
    )
    sim.set_defaults(func=_cmd_simulate)

    cond = sub.add_parser("conditions", help="closed-form recovery thresholds and constants")
    cond.add_argument("--a", default="3", help="block-count multiplier (int > 1); comma list or start:stop:step")
    cond.add_argument("--rho", default="1", help="support-estimate size ratio; sweepable")
    cond.add_argument("--alpha", default="0.5", help="support-estimate accuracy in [0, 1]; sweepable")
    cond.add_argument("--omega", default="1", help="weight in [0, 1]; sweepable")
    cond.add_argument("--p", default="0.5", help="mixed-norm exponent in (0, 1]; sweepable")
    cond.add_argument("--delta-ak", dest="delta_ak", type=float, help="isometry constant of order a*k (for C1/C2)")
    cond.add_argument("--delta-a1k", dest="delta_a1k", type=float, help="isometry constant of order (a+1)*k (for C1/C2)")
    cond.add_argument("--k", type=int, help="block sparsity (for C1/C2)")
    cond.add_argument("--m", type=int, help="number of measurements (for C1/C2)")
    cond.add_argument("--grid-out", dest="grid_out", help="optional CSV path for swept grids")
    cond.set_defaults(func=_cmd_conditions)

    ric = sub.add_parser("ric", help="sampled lower bound on a block isometry constant")
    ric.add_argument("--matrix", required=True)
    ric.add_argument("--d", required=True, type=int)
    ric.add_argument("--k", required=True, type=int)
    ric.add_argument("--p", required=True, type=float)
    ric.add_argument("--samples", type=int, default=1000)
    ric.add_argument("--seed", type=int, default=0)
    ric.add_argument("--witness-out", dest="witness_out", help="optional vector file for the witness")
    ric.set_defaults(func=_cmd_ric)

    nsp = sub.add_parser("nsp-check", help="randomized null-space property falsifier")
    nsp.add_argument("--matrix", required=True)
    nsp.add_argument("--d", required=True, type=int)
    nsp.add_argument("--k", required=True, type=int)
    nsp.add_argument("--s", required=True, type=int)
    nsp.add_argument("--omega", required=True, type=float)
    nsp.add_argument("--p", required=True, type=float)
    nsp.add_argument("--C", type=float, default=1.0, help="property constant (default 1.0)")
    nsp.add_argument("--samples", type=int, default=1000)
    nsp.add_argument("--seed", type=int, default=0)
    nsp.add_argument("--null-tol", dest="null_tol", type=float, default=1e-8)
    nsp.add_argument("--witness-out", dest="witness_out")
    nsp.set_defaults(func=_cmd_nsp_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
