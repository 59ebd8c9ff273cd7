"""Stopping criteria with per-right-hand-side status.

A criterion factory is created by the user; the solver generates a fresh
criterion from it on every solve (criteria hold single-solve state such as
the start instant of a time limit or the initial residual norms). The
solver calls ``check`` once per iteration with an :class:`Updater` carrying
whatever iteration state it produces; the criterion decides column by column
whether to stop.

Criterion-internal norm computations run outside the executor's counted
kernel channel by default (the traffic model covers solver kernels only);
pass ``counted_kernels=True`` to route them through the executor.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ParameterError, Unsupported
from .executor import Array
from .kernels import Norm2Kernel
from .loggers import EventKind, Loggable

#: Per-column stopping state. Once ``stopped`` is set it is never cleared
#: within a solve.
STOPPING_STATUS_DTYPE = np.dtype([("stopped", "?"), ("stopping_id", "u1"),
                                  ("finalized", "?")])


def new_stopping_status(exc, num_rhs) -> Array:
    status = Array(exc, size=num_rhs, dtype=STOPPING_STATUS_DTYPE)
    status.data["stopped"] = False
    status.data["stopping_id"] = 0
    status.data["finalized"] = False
    return status


@dataclass
class CriterionArgs:
    system_matrix: object
    rhs: object
    initial_guess: object
    initial_residual: object = None


@dataclass
class Updater:
    """Iteration state offered to a criterion check."""

    num_iterations: int
    residual: object = None          # Dense residual vectors
    residual_norm: object = None     # (m,) host array of column norms
    solution: object = None


class Criterion(Loggable):
    #: True when check() must be given residual information.
    needs_residual = False

    def check(self, stopping_id, set_finalized, status, updater):
        """Update ``status`` and return ``(all_stopped, one_changed)``."""
        raise NotImplementedError

    def propagate_channels(self, channels):
        """Deliver this criterion's events to the given logger channels."""
        self._log_channels = channels

    def _mark(self, status, mask, stopping_id, set_finalized):
        """Stop the unstopped columns selected by ``mask``; never overwrite
        columns stopped earlier."""
        data = status.data
        newly = mask & ~data["stopped"]
        if not newly.any():
            return False
        data["stopped"][newly] = True
        data["stopping_id"][newly] = stopping_id
        if set_finalized:
            data["finalized"][newly] = True
        return True

    def _emit_check(self, status, updater, relative_norms=None):
        self._log(EventKind.CRITERION_CHECK_COMPLETED, {
            "criterion": type(self).__name__,
            "num_iterations": updater.num_iterations,
            "num_stopped": int(status.data["stopped"].sum()),
            "relative_norms": relative_norms,
        })


class CriterionFactory:
    def generate(self, args: CriterionArgs) -> Criterion:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Iteration limit
# ---------------------------------------------------------------------------

class IterationCriterion(Criterion):
    def __init__(self, max_iters):
        super().__init__()
        self.max_iters = max_iters

    def check(self, stopping_id, set_finalized, status, updater):
        if updater.num_iterations < self.max_iters:
            self._emit_check(status, updater)
            return bool(status.data["stopped"].all()), False
        changed = self._mark(status, np.ones(len(status.data), bool),
                             stopping_id, set_finalized)
        self._emit_check(status, updater)
        return True, changed


class Iteration(CriterionFactory):
    """Stops every remaining column once the iteration count is reached."""

    def __init__(self, max_iters):
        if max_iters < 0:
            raise ParameterError("max_iters must be >= 0")
        self.max_iters = int(max_iters)

    def generate(self, args):
        return IterationCriterion(self.max_iters)


# ---------------------------------------------------------------------------
# Wall-clock limit
# ---------------------------------------------------------------------------

class TimeCriterion(Criterion):
    def __init__(self, limit_seconds):
        super().__init__()
        self.limit = limit_seconds
        self.start = time.monotonic()  # recorded at generation

    def check(self, stopping_id, set_finalized, status, updater):
        if time.monotonic() - self.start < self.limit:
            self._emit_check(status, updater)
            return bool(status.data["stopped"].all()), False
        changed = self._mark(status, np.ones(len(status.data), bool),
                             stopping_id, set_finalized)
        self._emit_check(status, updater)
        return True, changed


class TimeLimit(CriterionFactory):
    def __init__(self, limit_seconds):
        if limit_seconds <= 0:
            raise ParameterError("time limit must be positive")
        self.limit = float(limit_seconds)

    def generate(self, args):
        return TimeCriterion(self.limit)


# ---------------------------------------------------------------------------
# Relative residual norm
# ---------------------------------------------------------------------------

class ResidualNormReductionCriterion(Criterion):
    needs_residual = True

    def __init__(self, factor, baseline=None, counted_kernels=False):
        super().__init__()
        self.factor = factor
        self.baseline = baseline     # (m,) column norms of the initial residual
        self.counted_kernels = counted_kernels

    def _column_norms(self, updater):
        if updater.residual_norm is not None:
            return np.asarray(updater.residual_norm, dtype=float)
        r = updater.residual
        if r is None:
            raise Unsupported("ResidualNormReduction requires the residual or "
                              "its norm in the updater")
        if self.counted_kernels:
            out = r.like(1, r.size.cols)
            r.exec.run(Norm2Kernel(r.data, out.data))
            return out.data[0].copy()
        return np.sqrt(np.einsum("ij,ij->j", r.data, r.data))

    def check(self, stopping_id, set_finalized, status, updater):
        norms = self._column_norms(updater)
        if self.baseline is None:
            self.baseline = norms.copy()  # first check defines the reference
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(self.baseline > 0, norms / self.baseline,
                           np.where(norms == 0, 0.0, np.inf))
            converged = norms <= self.factor * self.baseline
        changed = self._mark(status, converged, stopping_id, set_finalized)
        self._emit_check(status, updater, relative_norms=[float(v) for v in rel])
        return bool(status.data["stopped"].all()), changed


class ResidualNormReduction(CriterionFactory):
    """Stops column j once ||r_j|| <= factor * ||r0_j||.

    The reference norm comes from ``args.initial_residual`` when the solver
    supplies one, otherwise from the residual of the first check.
    """

    def __init__(self, factor, counted_kernels=False):
        if not (0.0 < factor < 1.0):
            raise ParameterError("reduction factor must lie in (0, 1)")
        self.factor = float(factor)
        self.counted_kernels = counted_kernels

    def generate(self, args):
        baseline = None
        r0 = args.initial_residual
        if r0 is not None:
            baseline = np.sqrt(np.einsum("ij,ij->j", r0.data, r0.data))
        return ResidualNormReductionCriterion(self.factor, baseline,
                                              self.counted_kernels)


# ---------------------------------------------------------------------------
# Logical-OR combination
# ---------------------------------------------------------------------------

class CombinedCriterion(Criterion):
    def __init__(self, children):
        super().__init__()
        self.children = children

    @property
    def needs_residual(self):
        return any(c.needs_residual for c in self.children)

    def propagate_channels(self, channels):
        self._log_channels = channels
        for child in self.children:
            child.propagate_channels(channels)

    def check(self, stopping_id, set_finalized, status, updater):
        # Children are ORed per column; child i stamps stopping_id i+1 so the
        # firing criterion can be identified afterwards.
        changed = False
        for i, child in enumerate(self.children):
            _, child_changed = child.check(i + 1, set_finalized, status, updater)
            changed = changed or child_changed
        return bool(status.data["stopped"].all()), changed


class Combined(CriterionFactory):
    def __init__(self, factories):
        factories = list(factories)
        if not factories:
            raise ParameterError("combined criterion needs at least one child")
        self.factories = factories

    def generate(self, args):
        return CombinedCriterion([f.generate(args) for f in self.factories])

    def residual_criterion_ids(self):
        """1-based ids of children that certify convergence via the residual."""
        return frozenset(i + 1 for i, f in enumerate(self.factories)
                         if isinstance(f, ResidualNormReduction))
