"""opalg-bench: solve Matrix Market systems and run the benchmark suite.

Verbs: solve, profile, overhead, stream, model. All results are JSON on
stdout (profile also writes CSV curves). Exit codes: 0 success, 1 bad
input/parse error, 2 solver breakdown (the result JSON is still emitted).
"""

from __future__ import annotations

import argparse
import json
import sys

from . import bench
from .errors import OpalgError, ParseError


def _add_executor_flags(p):
    p.add_argument("--executor", default="reference",
                   choices=["reference", "parallel", "instrumented"])
    p.add_argument("--workers", type=int, default=None,
                   help="parallel executor worker count")


def _add_criteria_flags(p):
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--reduction-factor", type=float, default=None)
    p.add_argument("--time-limit-ms", type=float, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="opalg-bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one Matrix Market system")
    p.add_argument("matrix", help="path to a .mtx file")
    p.add_argument("--rhs", default="ones",
                   help="ones | random[:SEED] | file:PATH")
    p.add_argument("--solver", default="cg",
                   choices=sorted(bench.SOLVER_FACTORIES))
    p.add_argument("--krylov-dim", type=int, default=bench.DEFAULT_KRYLOV_DIM)
    p.add_argument("--precond", default="none",
                   choices=["none", "jacobi", "ilu"])
    p.add_argument("--block-size", type=int, default=1)
    p.add_argument("--adaptive", action="store_true",
                   help="adaptive-precision block storage for jacobi")
    p.add_argument("--sweeps", type=int, default=5,
                   help="fixed-point sweeps for the ILU factorization")
    p.add_argument("--format", dest="fmt", default="csr",
                   choices=["csr", "coo", "dense"])
    p.add_argument("--log", default="none",
                   choices=["none", "stream", "convergence"])
    p.add_argument("--log-file", default=None)
    p.add_argument("--output", default=None, help="write JSON here too")
    _add_executor_flags(p)
    _add_criteria_flags(p)

    p = sub.add_parser("profile", help="SpMV performance profile over a "
                                       "directory of matrices")
    p.add_argument("matrix_dir")
    p.add_argument("--formats", default="csr,coo,dense")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--tau-max", type=float, default=4.0)
    p.add_argument("--tau-points", type=int, default=31)
    p.add_argument("--out-csv", default=None)
    p.add_argument("--out-json", default=None)
    _add_executor_flags(p)

    p = sub.add_parser("overhead", help="per-iteration framework overhead on "
                                        "a 1x1 NaN system")
    p.add_argument("--solvers", default=",".join(bench.OVERHEAD_SOLVERS))
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--krylov-dim", type=int, default=bench.DEFAULT_KRYLOV_DIM)
    _add_executor_flags(p)

    p = sub.add_parser("stream", help="copy/mul/add/triad/dot bandwidth")
    p.add_argument("--sizes", default=str(1 << 22),
                   help="comma-separated element counts")
    p.add_argument("--reps", type=int, default=10)
    _add_executor_flags(p)

    p = sub.add_parser("model", help="predicted vs measured solver traffic")
    p.add_argument("--solvers", default="cg,fcg,cgs,bicgstab,gmres")
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--krylov-dim", type=int, default=bench.DEFAULT_KRYLOV_DIM)
    p.add_argument("--matrix", default=None, help=".mtx system (default: "
                                                  "generated Poisson)")
    p.add_argument("--poisson-grid", type=int, default=31)
    return parser


def _emit(result, path=None):
    text = json.dumps(result, indent=2)
    print(text)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            cfg = bench.RunConfig(
                matrix=args.matrix, rhs=args.rhs, executor=args.executor,
                workers=args.workers, solver=args.solver,
                krylov_dim=args.krylov_dim, precond=args.precond,
                block_size=args.block_size, adaptive=args.adaptive,
                sweeps=args.sweeps, max_iters=args.max_iters,
                reduction_factor=args.reduction_factor,
                time_limit_ms=args.time_limit_ms, fmt=args.fmt,
                log=args.log, log_file=args.log_file)
            result, code = bench.run_solve(cfg)
            _emit(result, args.output)
            return code

        if args.command == "profile":
            result = bench.run_profile(
                args.matrix_dir, formats=args.formats.split(","),
                reps=args.reps, tau_max=args.tau_max,
                tau_points=args.tau_points, executor=args.executor,
                workers=args.workers)
            _emit(result, args.out_json)
            if args.out_csv:
                with open(args.out_csv, "w") as fh:
                    fh.write(bench.profile_csv(result))
            return 0

        if args.command == "overhead":
            result = bench.run_overhead(
                solvers=args.solvers.split(","), iters=args.iters,
                runs=args.runs, krylov_dim=args.krylov_dim,
                executor=args.executor)
            _emit(result)
            return 0

        if args.command == "stream":
            sizes = [int(s) for s in args.sizes.split(",")]
            result = bench.run_stream(sizes=sizes, reps=args.reps,
                                      executor=args.executor,
                                      workers=args.workers)
            _emit(result)
            return 0

        if args.command == "model":
            result = bench.run_model(
                solvers=args.solvers.split(","), iters=args.iters,
                krylov_dim=args.krylov_dim, matrix=args.matrix,
                poisson_grid=args.poisson_grid)
            _emit(result)
            return 0
    except ParseError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OpalgError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
