"""opalg: a linear operator algebra toolkit.

Matrices, solvers, and preconditioners all implement the same operator
interface (``apply`` / ``apply_advanced``) and are built through factories
bound to a system matrix. All data lives on an executor; kernels dispatch
through it, and an instrumented executor measures the memory traffic of a
solve against a closed-form model.
"""

from .base import Composition, Dim2, Identity, LinOp, LinOpFactory, as_dense, clone_to, compose
from .errors import (ContractViolation, DimensionMismatch, KernelNotImplemented,
                     NotReady, OpalgError, ParameterError, ParseError, Singular,
                     Unsupported)
from .executor import (Array, Executor, ExecutorKind, InstrumentedExecutor,
                       Operation, ParallelExecutor, ReferenceExecutor,
                       StorageMode, Traffic, TrafficCounter, create_executor)
from .formats import Coo, Csr, Dense, MatrixData, StencilMatrix, convert, matrix_from_data
from .loggers import (ALL_EVENTS, ConvergenceLogger, EventKind, Logger,
                      RecordLogger, StreamLogger)
from .mmio import (read_matrix_market, read_matrix_market_file,
                   write_matrix_market, write_matrix_market_array)
from .model import TrafficParams, TrafficPrediction, measure_traffic, predict_traffic
from .ownership import PassMode, clone, give, lend, share
from .precond import (Ilu, IluFactors, IluPreconditioner, Jacobi, JacobiOperator,
                      ParIlu, gauss_jordan_inverse, parilu_generate,
                      uniform_block_boundaries)
from .solvers import (SOLVER_FACTORIES, Bicgstab, BreakdownInfo, Cg, Cgs, Fcg,
                      Gmres, Ir, LowerTrs, SolveStatus, UpperTrs)
from .stop import (Combined, CriterionArgs, Iteration, ResidualNormReduction,
                   TimeLimit, Updater)

__version__ = "0.1.0"
