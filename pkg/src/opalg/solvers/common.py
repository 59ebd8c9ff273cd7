"""Shared plumbing for generated solvers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..base import Identity, LinOp, LinOpFactory
from ..errors import DimensionMismatch, ParameterError
from ..formats import Coo, Dense
from ..kernels import CooResidualKernel
from ..loggers import EventKind
from ..ownership import take_ownership
from ..stop import Combined, CriterionArgs, CriterionFactory, new_stopping_status

#: stopping_id passed to a solver's (combined) criterion.
RELATIVE_STOPPING_ID = 1


@dataclass
class BreakdownInfo:
    iteration: int
    reason: str


@dataclass
class SolveStatus:
    """Outcome of the most recent apply of a generated solver."""

    iterations: int
    stopped: np.ndarray           # copy of the per-column stopping state
    breakdown: Optional[BreakdownInfo]
    residual_criterion_ids: frozenset

    @property
    def converged(self):
        """True when every column was stopped by a residual-based criterion."""
        if self.breakdown is not None or not self.stopped["stopped"].all():
            return False
        ids = self.stopped["stopping_id"]
        return all(int(i) in self.residual_criterion_ids for i in ids)

    @property
    def stopping_id(self):
        return int(self.stopped["stopping_id"].max(initial=0))


class IterativeSolverFactory(LinOpFactory):
    """Base factory for iterative solvers.

    Parameters are validated when the system matrix is bound (nested
    factories cannot see it earlier): the matrix must be square, at least one
    criterion must be present, and at most one of ``preconditioner`` /
    ``generated_preconditioner`` may be set.
    """

    solver_cls = None

    def __init__(self, exc, criteria, preconditioner=None,
                 generated_preconditioner=None, **params):
        super().__init__(exc)
        if isinstance(criteria, CriterionFactory):
            criteria = [criteria]
        self.criteria = list(criteria or [])
        self.preconditioner = preconditioner
        self.generated_preconditioner = generated_preconditioner
        self.params = params

    def _validate(self, a):
        if not a.size.square:
            raise DimensionMismatch(
                f"solvers require a square system matrix, got {tuple(a.size)}")
        if not self.criteria:
            raise ParameterError("at least one stopping criterion is required")
        if self.preconditioner is not None \
                and self.generated_preconditioner is not None:
            raise ParameterError("set either a preconditioner factory or a "
                                 "generated preconditioner, not both")

    def _build_preconditioner(self, a):
        if self.generated_preconditioner is not None:
            m = take_ownership(self.generated_preconditioner)
            if tuple(m.size) != tuple(a.size):
                raise DimensionMismatch("generated preconditioner does not "
                                        "match the system matrix")
            return m
        if self.preconditioner is not None:
            return self.preconditioner.generate(a)
        return Identity(a.exec, a.size.rows)

    def _generate(self, a):
        precond = self._build_preconditioner(a)
        return self.solver_cls(a, precond, Combined(self.criteria), self.params)


class IterativeSolver(LinOp):
    """A solver bound to its system matrix; applying it solves A x = b with
    the initial guess taken from x."""

    def __init__(self, a, precond, criterion_factory, params):
        super().__init__(a.exec, a.size)
        self.a = a
        self.precond = precond
        self.criterion_factory = criterion_factory
        self.params = dict(params)
        self.last_status: Optional[SolveStatus] = None

    # -- helpers shared by the concrete loops ----------------------------

    def _workspace(self, n, m, count):
        dt = self.a.vals.dtype if hasattr(self.a, "vals") else np.float64
        return [self.exec.alloc((n, m), dt) for _ in range(count)]

    def _residual(self, x, b, r):
        """r <- b - A x (fused single kernel for COO system matrices)."""
        a = self.a
        if isinstance(a, Coo):
            self.exec.run(CooResidualKernel(a.row_idxs, a.col_idxs, a.vals,
                                            x.data, b.data, r.data))
        else:
            r.copy_from(b)
            a.apply_advanced(-1.0, x, 1.0, r)

    def _make_criterion(self, b, x, initial_residual=None):
        crit = self.criterion_factory.generate(
            CriterionArgs(self.a, b, x, initial_residual))
        crit.propagate_channels(self._log_channels)  # observers follow the solve
        return crit

    def _new_status(self, m):
        return new_stopping_status(self.exec, m)

    def _log_iteration(self, it):
        self._log(EventKind.ITERATION_COMPLETE, {"iteration": it})

    def _finish(self, iterations, status, breakdown):
        self.last_status = SolveStatus(
            iterations=iterations,
            stopped=status.data.copy(),
            breakdown=breakdown,
            residual_criterion_ids=self.criterion_factory.residual_criterion_ids(),
        )

    def clone_to(self, target):
        a = self.a.clone_to(target)
        precond = self.precond.clone_to(target)
        clone = type(self)(a, precond, self.criterion_factory, self.params)
        return clone


def active_mask(status):
    """Bool mask of still-running columns, or None when all are running."""
    stopped = status.data["stopped"]
    if not stopped.any():
        return None
    return ~stopped
