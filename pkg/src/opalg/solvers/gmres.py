"""Restarted GMRES.

Arnoldi with modified Gram-Schmidt orthogonalization and Givens-rotation
least squares; the rotated system supplies a residual-norm estimate at every
iteration without forming the residual. The basis is capped at the restart
length ``krylov_dim``: when it fills up, the solution is updated, the true
residual is recomputed, and a fresh segment starts. Columns whose new basis
vector vanishes exactly (happy breakdown) are declared converged on the spot.

Preconditioning is applied on the right, so the rotation residual estimate
remains the true residual norm; with the identity preconditioner the extra
applications are skipped entirely.

Kernel traffic charges are the GMRES rows of the solver memory model
(``docs/traffic_model.md``), including their raw byte constants.
"""

from __future__ import annotations

import numpy as np

from ..base import Identity
from ..errors import ParameterError
from ..executor import Operation, Traffic
from ..formats import Dense
from ..stop import Updater
from .common import (RELATIVE_STOPPING_ID, BreakdownInfo, IterativeSolver,
                     IterativeSolverFactory)

#: stopping_id stamped by the solver itself on happy breakdown.
EXACT_CONVERGENCE_ID = 254

DEFAULT_KRYLOV_DIM = 100


def _givens(h1, h2):
    denom = np.hypot(h1, h2)
    safe = denom != 0
    c = np.where(safe, np.divide(h1, np.where(safe, denom, 1.0)), 1.0)
    s = np.where(safe, np.divide(h2, np.where(safe, denom, 1.0)), 0.0)
    return c, s, denom


class _GmresKernel(Operation):
    """Fused GMRES kernel; the charge is supplied per instance."""

    def __init__(self, body, charge, name):
        self._body = body
        self._charge = charge
        self.name = name

    def _run(self, exc):
        self._body()

    reference = parallel = _run

    def traffic(self):
        return self._charge


class _GmresState:
    """Per-apply workspace: basis, Hessenberg, and rotation state."""

    def __init__(self, exc, n, m, k, dtype):
        self.k = k
        self.v = exc.alloc((k + 1, n, m), dtype)
        self.h = exc.alloc((k + 1, k, m), dtype)
        self.cs = exc.alloc((k, m), dtype)
        self.sn = exc.alloc((k, m), dtype)
        self.gamma = exc.alloc((k + 1, m), dtype)
        self.w = exc.alloc((n, m), dtype)
        self.res_est = np.zeros(m)
        self.jcol = np.zeros(m, dtype=int)

    def reset_segment(self, r):
        beta = np.sqrt(np.einsum("ij,ij->j", r, r))
        self.gamma[...] = 0.0
        self.gamma[0] = beta
        self.cs[...] = 0.0
        self.sn[...] = 0.0
        exact_zero = beta == 0
        with np.errstate(invalid="ignore", divide="ignore"):
            self.v[0] = np.where(exact_zero, 0.0,
                                 r / np.where(exact_zero, 1.0, beta))
        self.res_est = beta.copy()
        self.jcol[...] = 0

    def arnoldi(self, j, running):
        """MGS + Givens at segment position j (1-based) for the running
        columns. Returns global indices of columns hitting happy breakdown."""
        v, h, w = self.v, self.h, self.w
        if w.size == 1 and running[0]:
            return self._arnoldi_scalar(j)
        all_cols = bool(running.all())
        sel = slice(None) if all_cols else running
        for i in range(j):
            hi = np.einsum("nm,nm->m", v[i][:, sel], w[:, sel])
            h[i, j - 1, sel] = hi
            w[:, sel] -= hi * v[i][:, sel]
        hj = np.sqrt(np.einsum("nm,nm->m", w[:, sel], w[:, sel]))
        h[j, j - 1, sel] = hj

        happy_local = hj == 0
        with np.errstate(invalid="ignore", divide="ignore"):
            v[j][:, sel] = np.where(happy_local, 0.0,
                                    w[:, sel] / np.where(happy_local, 1.0, hj))

        cs, sn, gamma = self.cs, self.sn, self.gamma
        for i in range(j - 1):
            h1 = h[i, j - 1, sel].copy()
            h2 = h[i + 1, j - 1, sel]
            h[i, j - 1, sel] = cs[i, sel] * h1 + sn[i, sel] * h2
            h[i + 1, j - 1, sel] = -sn[i, sel] * h1 + cs[i, sel] * h2
        c, s, denom = _givens(h[j - 1, j - 1, sel], h[j, j - 1, sel])
        cs[j - 1, sel] = c
        sn[j - 1, sel] = s
        h[j - 1, j - 1, sel] = denom
        h[j, j - 1, sel] = 0.0
        g = gamma[j - 1, sel].copy()
        gamma[j - 1, sel] = c * g
        gamma[j, sel] = -s * g

        self.res_est[sel] = np.abs(gamma[j, sel])
        self.jcol[sel] = j
        if not happy_local.any():
            return None
        if all_cols:
            return np.flatnonzero(happy_local)
        return np.flatnonzero(running)[happy_local]

    def _arnoldi_scalar(self, j):
        """Plain-float variant for 1x1 systems, where per-call array overhead
        would otherwise dwarf the O(j) recurrence work."""
        import math

        v, h, w = self.v, self.h, self.w
        cs, sn, gamma = self.cs, self.sn, self.gamma
        wv = float(w[0, 0])
        for i in range(j):
            hi = float(v[i, 0, 0]) * wv
            h[i, j - 1, 0] = hi
            wv -= hi * float(v[i, 0, 0])
        hj = abs(wv)
        h[j, j - 1, 0] = hj
        if hj == 0.0:
            v[j, 0, 0] = 0.0
        else:
            v[j, 0, 0] = wv / hj
        hcol = h[:, j - 1, 0]
        for i in range(j - 1):
            h1, h2 = float(hcol[i]), float(hcol[i + 1])
            c, s = float(cs[i, 0]), float(sn[i, 0])
            hcol[i] = c * h1 + s * h2
            hcol[i + 1] = -s * h1 + c * h2
        h1, h2 = float(hcol[j - 1]), float(hcol[j])
        denom = math.hypot(h1, h2)
        c, s = (1.0, 0.0) if denom == 0.0 else (h1 / denom, h2 / denom)
        cs[j - 1, 0] = c
        sn[j - 1, 0] = s
        hcol[j - 1] = denom
        hcol[j] = 0.0
        g = float(gamma[j - 1, 0])
        gamma[j - 1, 0] = c * g
        gamma[j, 0] = -s * g
        self.res_est[0] = abs(gamma[j, 0])
        self.jcol[0] = j
        return np.asarray([0]) if hj == 0.0 else None

    def back_solve(self, col, jc):
        """Solve the rotated upper-triangular system of one column at segment
        length jc. Returns None on a singular diagonal."""
        h, gamma = self.h, self.gamma
        y = np.zeros(jc)
        for i in reversed(range(jc)):
            diag = h[i, i, col]
            if diag == 0:
                return None
            y[i] = (gamma[i, col] - h[i, i + 1:jc, col] @ y[i + 1:jc]) / diag
        return y


class GmresSolver(IterativeSolver):
    def _apply_impl(self, b, x):
        exc = self.exec
        n, m = self.size.rows, b.size.cols
        dt = b.data.dtype
        vt = dt.itemsize
        k = int(self.params.get("krylov_dim") or DEFAULT_KRYLOV_DIM)
        if k < 1:
            raise ParameterError("krylov_dim must be >= 1")
        use_precond = not isinstance(self.precond, Identity)

        r = exc.alloc((n, m), dt)
        rd = Dense.wrap(exc, r)
        st = _GmresState(exc, n, m, k, dt)
        zd = Dense.wrap(exc, exc.alloc((n, m), dt)) if use_precond else None

        self._residual(x, b, rd)
        exc.run(_GmresKernel(
            lambda: st.reset_segment(r),
            Traffic((10 * n + 1) * m * vt, (5 * n + 2 * k + 3) * m * vt + 8),
            "gmres_init"))

        criterion = self._make_criterion(b, x, initial_residual=rd)
        status = self._new_status(m)
        it = 0
        j = 0
        breakdown = None

        exact0 = np.flatnonzero(st.res_est == 0)
        if exact0.size:
            self._declare_exact(st, status, x, exact0, use_precond)

        while True:
            before = status.data["stopped"].copy()
            all_stopped, _ = criterion.check(
                RELATIVE_STOPPING_ID, True, status,
                Updater(it, residual_norm=st.res_est.copy(), solution=x))
            newly = np.flatnonzero(status.data["stopped"] & ~before)
            if newly.size:
                err = self._apply_updates(st, x, newly, use_precond)
                if err is not None:
                    breakdown = BreakdownInfo(it, err)
                    break
            if all_stopped:
                break

            running = ~status.data["stopped"]
            j += 1
            vj = Dense.wrap(exc, st.v[j - 1])
            wd = Dense.wrap(exc, st.w)
            if use_precond:
                self.precond.apply(vj, zd)
                self.a.apply(zd, wd)
            else:
                self.a.apply(vj, wd)
            happy = []
            exc.run(_GmresKernel(
                lambda: happy.append(st.arnoldi(j, running)),
                Traffic(((7 * n + 5) + (j - 1) * (4 * n + 4)) * m * vt + 8,
                        ((3 * n + 8) + (j - 1) * (n + 2)) * m * vt + 8),
                "gmres_arnoldi"))
            it += 1
            self._log_iteration(it)
            if happy[0] is not None and happy[0].size:
                self._declare_exact(st, status, x, happy[0], use_precond)
                if status.data["stopped"].all():
                    break

            if j == k:
                running = ~status.data["stopped"]
                err = self._restart(st, x, b, rd, running, use_precond)
                if err is not None:
                    breakdown = BreakdownInfo(it, err)
                    break
                j = 0

        self._finish(it, status, breakdown)

    # -- solution updates --------------------------------------------------

    def _declare_exact(self, st, status, x, cols, use_precond):
        """Happy breakdown: commit and stop the columns as converged."""
        self._apply_updates(st, x, cols, use_precond)
        status.data["stopped"][cols] = True
        status.data["stopping_id"][cols] = EXACT_CONVERGENCE_ID
        status.data["finalized"][cols] = True
        st.res_est[cols] = 0.0

    def _solution_increments(self, st, cols, jc_of):
        """Back-solve each column and form its basis combination."""
        updates = []
        for c in cols:
            jc = jc_of(c)
            if jc == 0:
                continue
            y = st.back_solve(c, jc)
            if y is None:
                return None, "singular Hessenberg system"
            updates.append((int(c), jc, y))
        return updates, None

    def _commit(self, x, st, updates, use_precond):
        if not updates:
            return
        if not use_precond:
            for c, jc, y in updates:
                x.data[:, c] += np.tensordot(y, st.v[:jc, :, c], axes=(0, 0))
            return
        cols = [c for c, _, _ in updates]
        u = np.stack([np.tensordot(y, st.v[:jc, :, c], axes=(0, 0))
                      for c, jc, y in updates], axis=1)
        ud = Dense.wrap(self.exec, u)
        mu = ud.like(u.shape[0], u.shape[1])
        self.precond.apply(ud, mu)
        x.data[:, cols] += mu.data

    def _apply_updates(self, st, x, cols, use_precond):
        """Partial-segment update at stop time; charged per the model's
        r-dependent term."""
        n, m = x.data.shape
        vt = x.data.dtype.itemsize
        updates, err = self._solution_increments(st, cols, lambda c: int(st.jcol[c]))
        if err is not None:
            return err
        if not updates:
            return None
        reads = sum((n * jc + jc * (jc + 5) // 2) * vt for _, jc, _ in updates)
        writes = sum(jc * vt for _, jc, _ in updates)
        self.exec.run(_GmresKernel(
            lambda: self._commit(x, st, updates, use_precond),
            Traffic(reads, writes), "gmres_finalize"))
        return None

    def _restart(self, st, x, b, rd, running, use_precond):
        """Fold the full basis into x, recompute the residual, reset."""
        n, m = x.data.shape
        vt = x.data.dtype.itemsize
        k = st.k
        updates, err = self._solution_increments(
            st, np.flatnonzero(running), lambda c: k)
        if err is not None:
            return err
        self.exec.run(_GmresKernel(
            lambda: self._commit(x, st, updates, use_precond),
            Traffic((k * n + k * (k + 5) // 2 + 1) * m * vt, (n + k) * m * vt),
            "gmres_restart_update"))
        self._residual(x, b, rd)

        def reset():
            prev_est = st.res_est.copy()
            st.reset_segment(rd.data)
            stopped = ~running
            if stopped.any():
                st.res_est[stopped] = prev_est[stopped]

        self.exec.run(_GmresKernel(
            reset, Traffic(9 * n * m * vt, (4 * n + 2) * m * vt + 8),
            "gmres_restart_reset"))
        return None


class Gmres(IterativeSolverFactory):
    solver_cls = GmresSolver

    def __init__(self, exc, criteria, preconditioner=None,
                 generated_preconditioner=None, krylov_dim=DEFAULT_KRYLOV_DIM):
        super().__init__(exc, criteria, preconditioner,
                         generated_preconditioner, krylov_dim=krylov_dim)

    def _validate(self, a):
        super()._validate(a)
        if int(self.params["krylov_dim"]) < 1:
            raise ParameterError("krylov_dim must be >= 1")
