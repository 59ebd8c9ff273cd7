"""Benchmark harness logic behind the CLI.

Each ``run_*`` function returns plain dicts/lists ready for JSON output, so
everything here is testable without spawning a process.
"""

from __future__ import annotations

import os
import sys
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import OpalgError, ParseError, Unsupported
from .executor import create_executor
from .formats import Coo, Dense, matrix_from_data
from .kernels import CopyKernel, DotKernel, ElementwiseKernel
from .loggers import ALL_EVENTS, ConvergenceLogger, EventKind, StreamLogger
from .mmio import read_matrix_market_file
from .model import TrafficParams, measure_traffic, predict_traffic
from .precond import Ilu, Jacobi
from .problems import five_point_poisson
from .solvers import SOLVER_FACTORIES, DEFAULT_KRYLOV_DIM
from .stop import Iteration, ResidualNormReduction, TimeLimit

SOLVE_SCHEMA = "opalg-bench/solve/v1"
PROFILE_SCHEMA = "opalg-bench/profile/v1"
OVERHEAD_SCHEMA = "opalg-bench/overhead/v1"
STREAM_SCHEMA = "opalg-bench/stream/v1"
MODEL_SCHEMA = "opalg-bench/model/v1"

OVERHEAD_SOLVERS = ("bicgstab", "cg", "cgs", "fcg", "gmres")


@dataclass
class RunConfig:
    """Everything one `solve` invocation needs."""

    matrix: str
    rhs: str = "ones"                  # ones | random:SEED | file:PATH
    executor: str = "reference"
    workers: Optional[int] = None
    solver: str = "cg"
    krylov_dim: int = DEFAULT_KRYLOV_DIM
    precond: str = "none"              # none | jacobi | ilu
    block_size: int = 1
    adaptive: bool = False
    sweeps: int = 5
    max_iters: Optional[int] = None
    reduction_factor: Optional[float] = None
    time_limit_ms: Optional[float] = None
    fmt: str = "csr"
    seed: int = 0
    log: str = "none"                  # none | stream | convergence
    log_file: Optional[str] = None


def build_executor(name, workers=None):
    return create_executor(name, workers=workers)


def build_criteria(max_iters=None, reduction_factor=None, time_limit_ms=None):
    crits = []
    if max_iters is not None:
        crits.append(Iteration(max_iters))
    if reduction_factor is not None:
        crits.append(ResidualNormReduction(reduction_factor))
    if time_limit_ms is not None:
        crits.append(TimeLimit(time_limit_ms / 1000.0))
    if not crits:
        crits = [Iteration(1000), ResidualNormReduction(1e-8)]
    return crits


def build_preconditioner(cfg: RunConfig, exc):
    if cfg.precond == "none":
        return None
    if cfg.precond == "jacobi":
        return Jacobi(exc, block_size=cfg.block_size,
                      adaptive_precision=cfg.adaptive)
    if cfg.precond == "ilu":
        return Ilu(exc, sweeps=cfg.sweeps)
    raise Unsupported(f"unknown preconditioner {cfg.precond!r}")


def build_solver_factory(cfg: RunConfig, exc, criteria):
    name = cfg.solver.lower()
    if name not in SOLVER_FACTORIES:
        raise Unsupported(f"unknown solver {cfg.solver!r}")
    precond = build_preconditioner(cfg, exc)
    if name == "ir":
        # the inner correction takes the role the preconditioner plays elsewhere
        inner = precond or Jacobi(exc)
        return SOLVER_FACTORIES[name](exc, criteria=criteria, inner=inner)
    kwargs = {}
    if name == "gmres":
        kwargs["krylov_dim"] = cfg.krylov_dim
    return SOLVER_FACTORIES[name](exc, criteria=criteria,
                                  preconditioner=precond, **kwargs)


def _load_rhs(cfg, exc, n):
    if cfg.rhs == "ones":
        return Dense(exc, np.ones((n, 1)))
    if cfg.rhs.startswith("random"):
        seed = int(cfg.rhs.split(":", 1)[1]) if ":" in cfg.rhs else cfg.seed
        rng = np.random.default_rng(seed)
        return Dense(exc, rng.standard_normal((n, 1)))
    if cfg.rhs.startswith("file:"):
        data = read_matrix_market_file(cfg.rhs[5:])
        return Dense(exc, data.to_dense_array())
    raise Unsupported(f"unknown rhs source {cfg.rhs!r}")


def run_solve(cfg: RunConfig):
    """Solve one Matrix Market system; returns (result dict, exit code)."""
    if not os.path.exists(cfg.matrix):
        raise ParseError(f"matrix file not found: {cfg.matrix}")
    exc = build_executor(cfg.executor, cfg.workers)
    data = read_matrix_market_file(cfg.matrix)
    a = matrix_from_data(exc, data.canonicalize(), cfg.fmt)
    n = a.size.rows
    b = _load_rhs(cfg, exc, n)
    x = Dense.zeros(exc, n, b.size.cols)

    criteria = build_criteria(cfg.max_iters, cfg.reduction_factor,
                              cfg.time_limit_ms)
    factory = build_solver_factory(cfg, exc, criteria)
    solver = factory.generate(a)

    sink = None
    if cfg.log == "stream":
        sink = open(cfg.log_file, "w") if cfg.log_file else None
        solver.attach(StreamLogger(sink or sys.stderr), ALL_EVENTS)
    conv_logger = None
    if cfg.log == "convergence":
        conv_logger = ConvergenceLogger()
        solver.attach(conv_logger,
                      {EventKind.ITERATION_COMPLETE,
                       EventKind.CRITERION_CHECK_COMPLETED})

    t0 = time.monotonic_ns()
    solver.apply(b, x)
    wall = time.monotonic_ns() - t0
    if sink is not None:
        sink.close()

    status = solver.last_status
    r = b.data - _matvec(a, x)
    bnorm = float(np.linalg.norm(b.data))
    rel = float(np.linalg.norm(r) / bnorm) if bnorm > 0 \
        else float(np.linalg.norm(r))
    result = {
        "schema": SOLVE_SCHEMA,
        "n": n,
        "nnz": data.canonicalize().nnz,
        "solver": cfg.solver,
        "precond": cfg.precond,
        "iterations": status.iterations,
        "final_relative_residual": rel,
        "wall_ns": wall,
        "converged": status.converged,
        "stopping_id": status.stopping_id,
    }
    if status.breakdown is not None:
        result["breakdown"] = {"iteration": status.breakdown.iteration,
                               "reason": status.breakdown.reason}
        result["converged"] = False
        return result, 2
    return result, 0


def _matvec(a, x):
    out = Dense.zeros(a.exec, a.size.rows, x.size.cols)
    a.apply(x, out)
    return out.data


# ---------------------------------------------------------------------------
# SpMV performance profile
# ---------------------------------------------------------------------------

def profile_curves(runtimes, taus):
    """Coverage curves from a (format -> per-matrix runtime list) table.

    A format covers a matrix at slowdown factor tau when its runtime is
    within tau of the per-matrix best; ties at tau = 1 credit every tied
    format.
    """
    formats = sorted(runtimes)
    table = np.asarray([runtimes[f] for f in formats], dtype=float)
    best = table.min(axis=0)
    curves = {}
    for i, f in enumerate(formats):
        curves[f] = [(float(tau), float(np.mean(table[i] <= tau * best)))
                     for tau in taus]
    return curves


def run_profile(matrix_dir, formats=("csr", "coo", "dense"), reps=10,
                tau_max=4.0, tau_points=31, executor="reference", workers=None):
    exc = build_executor(executor, workers)
    paths = sorted(p for p in os.listdir(matrix_dir) if p.endswith(".mtx"))
    runtimes = {f: [] for f in formats}
    used, skipped = [], []
    for name in paths:
        path = os.path.join(matrix_dir, name)
        try:
            data = read_matrix_market_file(path).canonicalize()
        except (ParseError, Unsupported, OSError) as err:
            skipped.append({"matrix": name, "error": str(err)})
            continue
        mats = {f: matrix_from_data(exc, data, f) for f in formats}
        rng = np.random.default_rng(0)
        b = Dense(exc, rng.standard_normal((data.size.cols, 1)))
        x = Dense.zeros(exc, data.size.rows, 1)
        used.append(name)
        for f, a in mats.items():
            a.apply(b, x)  # warmup
            samples = []
            for _ in range(reps):
                t0 = time.perf_counter_ns()
                a.apply(b, x)
                samples.append(time.perf_counter_ns() - t0)
            runtimes[f].append(float(np.median(samples)))
    taus = np.linspace(1.0, tau_max, tau_points)
    curves = profile_curves(runtimes, taus) if used else {}
    return {
        "schema": PROFILE_SCHEMA,
        "matrices": used,
        "skipped": skipped,
        "repetitions": reps,
        "runtimes_ns": runtimes,
        "curves": curves,
    }


def profile_csv(result):
    lines = ["format,tau,fraction"]
    for fmt, curve in sorted(result["curves"].items()):
        for tau, frac in curve:
            lines.append(f"{fmt},{tau:.6g},{frac:.6g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Runtime-polymorphism overhead microbenchmark
# ---------------------------------------------------------------------------

def run_overhead(solvers=OVERHEAD_SOLVERS, iters=1000, runs=100,
                 krylov_dim=DEFAULT_KRYLOV_DIM, executor="reference"):
    """Time-per-iteration on a 1x1 system with b = NaN.

    The NaN right-hand side drives every dispatch branch with negligible
    kernel work; iteration control must come from an iteration criterion
    alone, since residual-based criteria would never fire on NaN.
    """
    exc = build_executor(executor)
    results = {}
    for name in solvers:
        factory_cls = SOLVER_FACTORIES[name.lower()]
        kwargs = {"krylov_dim": krylov_dim} if name.lower() == "gmres" else {}
        a = Coo(exc, (1, 1), [0], [0], [1.0])
        factory = factory_cls(exc, criteria=[Iteration(iters)], **kwargs)
        solver = factory.generate(a)
        per_run = []
        for _ in range(runs):
            b = Dense(exc, [[float("nan")]])
            x = Dense.zeros(exc, 1, 1)
            t0 = time.perf_counter_ns()
            solver.apply(b, x)
            per_run.append((time.perf_counter_ns() - t0) / iters)
            if solver.last_status.iterations != iters:
                raise OpalgError(f"{name}: expected {iters} iterations, got "
                                 f"{solver.last_status.iterations}")
        results[name] = {
            "iterations": iters,
            "runs": runs,
            "time_per_iteration_us": float(np.mean(per_run)) / 1000.0,
        }
    times = [v["time_per_iteration_us"] for v in results.values()]
    return {
        "schema": OVERHEAD_SCHEMA,
        "solvers": results,
        "max_over_min": float(max(times) / min(times)) if times else None,
    }


# ---------------------------------------------------------------------------
# Stream bandwidth probe
# ---------------------------------------------------------------------------

def run_stream(sizes=(1 << 22,), reps=10, executor="reference", workers=None):
    """copy/mul/add/triad/dot bandwidth with kernel results verified before
    timing; bytes moved follow the kernel traffic ledger."""
    exc = build_executor(executor, workers)
    out_sizes = []
    for n in sizes:
        rng = np.random.default_rng(7)
        b = rng.standard_normal((n, 1))
        c = rng.standard_normal((n, 1))
        a = np.empty_like(b)
        alpha = 0.42
        scalar_out = np.zeros((1, 1))

        kernels = {
            "copy": lambda: CopyKernel(b, a),
            "mul": lambda: ElementwiseKernel("mul", lambda cc: alpha * cc, [c], a),
            "add": lambda: ElementwiseKernel("add", lambda bb, cc: bb + cc, [b, c], a),
            "triad": lambda: ElementwiseKernel("triad",
                                               lambda bb, cc: bb + alpha * cc,
                                               [b, c], a),
            "dot": lambda: DotKernel(b, c, scalar_out),
        }

        # verify results before timing
        exc.run(kernels["triad"]())
        if not np.array_equal(a, b + alpha * c):
            raise OpalgError("triad verification failed")
        exc.run(kernels["dot"]())
        oracle = float(np.einsum("ij,ij->", b, c))
        if abs(scalar_out[0, 0] - oracle) > 2.0 ** -40 * max(abs(oracle), 1.0):
            raise OpalgError("dot verification failed")

        entry = {"n": n, "kernels": {}}
        for name, make in kernels.items():
            op = make()
            tr = op.traffic()
            nbytes = tr.bytes_read + tr.bytes_written
            samples = []
            for _ in range(reps):
                t0 = time.perf_counter_ns()
                exc.run(op)
                samples.append(time.perf_counter_ns() - t0)
            med = float(np.median(samples))
            entry["kernels"][name] = {
                "bytes": nbytes,
                "time_ns": med,
                "gbps": nbytes / med if med > 0 else None,
            }
        out_sizes.append(entry)
    return {"schema": STREAM_SCHEMA, "sizes": out_sizes}


# ---------------------------------------------------------------------------
# Traffic model check
# ---------------------------------------------------------------------------

def run_model(solvers=("cg", "fcg", "cgs", "bicgstab", "gmres"), iters=10,
              krylov_dim=DEFAULT_KRYLOV_DIM, matrix=None, poisson_grid=31):
    """Predicted vs measured bytes for forced-iteration solves on one system."""
    exc = create_executor("instrumented")
    if matrix is not None:
        data = read_matrix_market_file(matrix).canonicalize()
    else:
        data = five_point_poisson(poisson_grid)
    a = Coo.from_data(exc, data)
    n, nnz = a.size.rows, a.nnz
    vt = a.vals.dtype.itemsize
    it = a.row_idxs.dtype.itemsize
    rows = []
    for name in solvers:
        params = TrafficParams(n, nnz, iters, value_bytes=vt, index_bytes=it,
                               krylov_dim=krylov_dim)
        pred = predict_traffic(name, params)
        meas, wall = measure_traffic(name, a, iters, krylov_dim=krylov_dim)
        rows.append({
            "solver": name,
            "iterations": iters,
            "predicted_read": pred.bytes_read,
            "predicted_write": pred.bytes_written,
            "measured_read": meas.bytes_read,
            "measured_write": meas.bytes_written,
            "exact_match": (pred.bytes_read == meas.bytes_read
                            and pred.bytes_written == meas.bytes_written),
            "wall_ns": wall,
        })
    return {
        "schema": MODEL_SCHEMA,
        "n": n,
        "nnz": nnz,
        "value_bytes": vt,
        "index_bytes": it,
        "krylov_dim": krylov_dim,
        "results": rows,
    }
