"""Krylov solvers: CG, FCG, CGS, and BiCGSTAB.

Each generated solver runs a fixed per-iteration kernel inventory (fused step
kernels, one SpMV per iteration or per half-iteration, and the reduction
kernels); the inventory is what the instrumented executor measures and what
the closed-form traffic model predicts. CGS and BiCGSTAB advance in
half-iterations: the iteration counter increments and the stopping criterion
runs after every half, each of which contains one SpMV.

Breakdown (a vanishing recurrence denominator with a nonzero residual) is
reported through the solver status, not as an exception; columns whose
residual is exactly zero are frozen silently instead.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch
from ..formats import Dense
from ..kernels import DotKernel
from ..stop import Updater
from . import steps
from .common import (RELATIVE_STOPPING_ID, BreakdownInfo, IterativeSolver,
                     IterativeSolverFactory, active_mask)


def _wrap(exc, *arrays):
    return [Dense.wrap(exc, a) for a in arrays]


def _residual_nonzero(r, cols):
    return any(np.any(r[:, c] != 0) for c in cols)


class CgSolver(IterativeSolver):
    """Preconditioned conjugate gradients (SPD systems)."""

    def _apply_impl(self, b, x):
        exc = self.exec
        n, m = self.size.rows, b.size.cols
        dt = b.data.dtype
        r, z, p, q = (exc.alloc((n, m), dt) for _ in range(4))
        rho, prev_rho, sigma = (exc.alloc((1, m), dt) for _ in range(3))
        rd, zd, pd, qd = _wrap(exc, r, z, p, q)

        self._residual(x, b, rd)
        exc.run(steps.cg_init(z, p, q, prev_rho))
        self.precond.apply(rd, zd)
        exc.run(DotKernel(r, z, rho))

        criterion = self._make_criterion(b, x, initial_residual=rd)
        status = self._new_status(m)
        it = 0
        breakdown = None
        while True:
            all_stopped, _ = criterion.check(
                RELATIVE_STOPPING_ID, True, status,
                Updater(it, residual=rd, solution=x))
            if all_stopped:
                break
            active = active_mask(status)
            exc.run(steps.CgStep1(p, z, rho, prev_rho, active))
            self.a.apply(pd, qd)
            exc.run(DotKernel(p, q, sigma))
            running = ~status.data["stopped"]
            bad = (sigma[0] <= 0) & (rho[0] != 0) & running
            if bad.any():
                breakdown = BreakdownInfo(it + 1, "non-positive p^T A p")
                break
            exc.run(steps.CgStep2(x.data, r, p, q, sigma, rho, active))
            rho, prev_rho = prev_rho, rho
            self.precond.apply(rd, zd)
            exc.run(DotKernel(r, z, rho))
            it += 1
            self._log_iteration(it)
        self._finish(it, status, breakdown)


class FcgSolver(IterativeSolver):
    """Flexible CG: the direction update uses (r_new - r_old, z), which costs
    one extra residual-difference vector and one extra reduction per
    iteration compared to CG."""

    def _apply_impl(self, b, x):
        exc = self.exec
        n, m = self.size.rows, b.size.cols
        dt = b.data.dtype
        r, z, p, q, t = (exc.alloc((n, m), dt) for _ in range(5))
        rho, prev_rho, sigma, rho_t = (exc.alloc((1, m), dt) for _ in range(4))
        rd, zd, pd, qd = _wrap(exc, r, z, p, q)

        self._residual(x, b, rd)
        exc.run(steps.fcg_init(z, p, q, t, prev_rho, rho_t))
        self.precond.apply(rd, zd)
        exc.run(DotKernel(r, z, rho))

        criterion = self._make_criterion(b, x, initial_residual=rd)
        status = self._new_status(m)
        it = 0
        breakdown = None
        while True:
            all_stopped, _ = criterion.check(
                RELATIVE_STOPPING_ID, True, status,
                Updater(it, residual=rd, solution=x))
            if all_stopped:
                break
            active = active_mask(status)
            exc.run(steps.FcgStep1(p, z, rho_t, prev_rho, active))
            self.a.apply(pd, qd)
            exc.run(DotKernel(p, q, sigma))
            running = ~status.data["stopped"]
            bad = (sigma[0] <= 0) & (rho[0] != 0) & running
            if bad.any():
                breakdown = BreakdownInfo(it + 1, "non-positive p^T A p")
                break
            exc.run(steps.FcgStep2(x.data, r, t, p, q, sigma, rho, active))
            rho, prev_rho = prev_rho, rho
            self.precond.apply(rd, zd)
            exc.run(DotKernel(r, z, rho))
            exc.run(DotKernel(t, z, rho_t))
            it += 1
            self._log_iteration(it)
        self._finish(it, status, breakdown)


class CgsSolver(IterativeSolver):
    """Conjugate gradient squared (general systems, two SpMVs per cycle)."""

    def _apply_impl(self, b, x):
        exc = self.exec
        n, m = self.size.rows, b.size.cols
        dt = b.data.dtype
        r, rt, p, q, u, u_hat, v_hat, t, w = (exc.alloc((n, m), dt)
                                              for _ in range(9))
        rho, prev_rho, gamma, alpha = (exc.alloc((1, m), dt) for _ in range(4))
        rd, pd, ud, uhd, vhd, td, wd = _wrap(exc, r, p, u, u_hat, v_hat, t, w)

        exc.run(steps.cgs_init(b.data, r, rt, [p, q, u, u_hat, v_hat, t],
                               prev_rho, rho))
        self.a.apply_advanced(-1.0, x, 1.0, rd)

        criterion = self._make_criterion(b, x, initial_residual=rd)
        status = self._new_status(m)
        it = 0
        breakdown = None
        while True:
            all_stopped, _ = criterion.check(
                RELATIVE_STOPPING_ID, True, status,
                Updater(it, residual=rd, solution=x))
            if all_stopped:
                break
            active = active_mask(status)
            running = ~status.data["stopped"]

            # first half: direction update and first SpMV
            exc.run(DotKernel(rt, r, rho))
            zero_rho = (rho[0] == 0) & running
            if zero_rho.any() and _residual_nonzero(r, np.flatnonzero(zero_rho)):
                breakdown = BreakdownInfo(it + 1, "rho = 0")
                break
            exc.run(steps.CgsStep1(u, p, r, q, rho, prev_rho, active))
            self.precond.apply(pd, td)
            self.a.apply(td, vhd)
            exc.run(DotKernel(rt, v_hat, gamma))
            zero_gamma = (gamma[0] == 0) & (rho[0] != 0) & running
            if zero_gamma.any():
                breakdown = BreakdownInfo(it + 1, "r_tld^T A p = 0")
                break
            exc.run(steps.CgsStep2(q, w, u, v_hat, rho, gamma, alpha, active))
            it += 1
            self._log_iteration(it)
            all_stopped, _ = criterion.check(
                RELATIVE_STOPPING_ID, True, status,
                Updater(it, residual=rd, solution=x))
            if all_stopped:
                break
            active = active_mask(status)

            # second half: correction and second SpMV
            self.precond.apply(wd, uhd)
            self.a.apply(uhd, td)
            exc.run(steps.CgsStep3(x.data, r, t, u_hat, alpha, active))
            rho, prev_rho = prev_rho, rho
            it += 1
            self._log_iteration(it)
        self._finish(it, status, breakdown)


class BicgstabSolver(IterativeSolver):
    """BiCGSTAB (general systems, two SpMVs per cycle).

    The criterion also runs after the intermediate-residual half; columns that
    converge there receive the pending half-update of the solution. A forced
    stop (iteration/time criterion) at the half boundary returns the last full
    iterate unchanged.
    """

    def _apply_impl(self, b, x):
        exc = self.exec
        n, m = self.size.rows, b.size.cols
        dt = b.data.dtype
        r, rt, p, v, s, t, y, z = (exc.alloc((n, m), dt) for _ in range(8))
        rho, prev_rho, gamma, alpha, omega, ts, tt = (
            exc.alloc((1, m), dt) for _ in range(7))
        rd, pd, vd, sd, td, yd, zd = _wrap(exc, r, p, v, s, t, y, z)

        seeds = [(prev_rho, 1.0), (alpha, 1.0), (omega, 1.0),
                 (rho, 0.0), (ts, 0.0), (tt, 0.0)]
        exc.run(steps.bicgstab_init(b.data, r, rt, [p, v, s, t, y, z], seeds))
        self.a.apply_advanced(-1.0, x, 1.0, rd)

        criterion = self._make_criterion(b, x, initial_residual=rd)
        status = self._new_status(m)
        it = 0
        breakdown = None
        while True:
            all_stopped, _ = criterion.check(
                RELATIVE_STOPPING_ID, True, status,
                Updater(it, residual=rd, solution=x))
            if all_stopped:
                break
            active = active_mask(status)
            running = ~status.data["stopped"]

            # first half: direction, first SpMV, intermediate residual s
            exc.run(DotKernel(rt, r, rho))
            zero_rho = (rho[0] == 0) & running
            if zero_rho.any() and _residual_nonzero(r, np.flatnonzero(zero_rho)):
                breakdown = BreakdownInfo(it + 1, "rho = 0")
                break
            exc.run(steps.BicgstabStep1(p, r, v, rho, prev_rho, alpha, omega,
                                        active))
            self.precond.apply(pd, yd)
            self.a.apply(yd, vd)
            exc.run(DotKernel(rt, v, gamma))
            zero_gamma = (gamma[0] == 0) & (rho[0] != 0) & running
            if zero_gamma.any():
                breakdown = BreakdownInfo(it + 1, "r_tld^T A p = 0")
                break
            exc.run(steps.BicgstabStep2(s, r, v, rho, gamma, alpha, active))
            it += 1
            self._log_iteration(it)
            before = status.data["stopped"].copy()
            all_stopped, _ = criterion.check(
                RELATIVE_STOPPING_ID, True, status,
                Updater(it, residual=sd, solution=x))
            newly = status.data["stopped"] & ~before
            if newly.any() and criterion.needs_residual:
                # converged on ||s||: commit the pending half-step
                exc.run(steps.BicgstabFinalize(x.data, y, alpha, newly))
            if all_stopped:
                break
            active = active_mask(status)
            running = ~status.data["stopped"]

            # second half: stabilization SpMV and the full update
            self.precond.apply(sd, zd)
            self.a.apply(zd, td)
            exc.run(DotKernel(t, s, ts))
            exc.run(DotKernel(t, t, tt))
            zero_tt = (tt[0] == 0) & (ts[0] != 0) & running
            if zero_tt.any():
                breakdown = BreakdownInfo(it + 1, "t^T t = 0")
                break
            exc.run(steps.BicgstabStep3(x.data, r, s, t, y, z, ts, tt,
                                        alpha, omega, active))
            rho, prev_rho = prev_rho, rho
            it += 1
            self._log_iteration(it)
        self._finish(it, status, breakdown)


class Cg(IterativeSolverFactory):
    solver_cls = CgSolver


class Fcg(IterativeSolverFactory):
    solver_cls = FcgSolver


class Cgs(IterativeSolverFactory):
    solver_cls = CgsSolver


class Bicgstab(IterativeSolverFactory):
    solver_cls = BicgstabSolver
