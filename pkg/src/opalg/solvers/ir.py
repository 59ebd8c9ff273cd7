"""Iterative refinement with a pluggable inner solver."""

from __future__ import annotations

from ..errors import ParameterError
from ..formats import Dense
from ..kernels import AddScaledKernel
from ..stop import Combined, Updater
from .common import (RELATIVE_STOPPING_ID, IterativeSolver,
                     IterativeSolverFactory, active_mask)


class IrSolver(IterativeSolver):
    """x <- x + S(b - A x) per iteration, where S is the generated inner
    operator (a solver, preconditioner, or any other correction)."""

    def _apply_impl(self, b, x):
        exc = self.exec
        n, m = self.size.rows, b.size.cols
        dt = b.data.dtype
        r = exc.alloc((n, m), dt)
        d = exc.alloc((n, m), dt)
        rd, dd = Dense.wrap(exc, r), Dense.wrap(exc, d)
        inner = self.params["inner_op"]

        self._residual(x, b, rd)
        criterion = self._make_criterion(b, x, initial_residual=rd)
        status = self._new_status(m)
        it = 0
        while True:
            all_stopped, _ = criterion.check(
                RELATIVE_STOPPING_ID, True, status,
                Updater(it, residual=rd, solution=x))
            if all_stopped:
                break
            active = active_mask(status)
            inner.apply(rd, dd)
            if active is None:
                exc.run(AddScaledKernel(1.0, d, x.data))
            else:
                # freeze stopped columns: only update the running ones
                exc.run(AddScaledKernel(
                    (active.astype(x.data.dtype))[None, :], d, x.data))
            self._residual(x, b, rd)
            it += 1
            self._log_iteration(it)
        self._finish(it, status, None)


class Ir(IterativeSolverFactory):
    """Iterative refinement; ``inner`` is the factory for the correction
    operator (defaults to no factory, which is an error)."""

    solver_cls = IrSolver

    def __init__(self, exc, criteria, inner=None, generated_inner=None):
        super().__init__(exc, criteria)
        self.inner = inner
        self.generated_inner = generated_inner

    def _validate(self, a):
        super()._validate(a)
        if self.inner is None and self.generated_inner is None:
            raise ParameterError("iterative refinement requires an inner solver")

    def _generate(self, a):
        if self.generated_inner is not None:
            inner_op = self.generated_inner
        else:
            inner_op = self.inner.generate(a)
        return IrSolver(a, self._build_preconditioner(a),
                        Combined(self.criteria), {"inner_op": inner_op})
