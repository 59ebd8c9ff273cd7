"""Direct sparse triangular solvers.

The reference kernel is plain forward/backward substitution. The parallel
kernel schedules rows by dependency level: rows within one level have no
mutual dependencies and are solved concurrently in contiguous blocks.
"""

from __future__ import annotations

import numpy as np

from ..base import LinOp, LinOpFactory
from ..errors import DimensionMismatch, Singular
from ..executor import Operation, Traffic
from ..formats import Csr


class TrsKernel(Operation):
    def __init__(self, trs, b, x):
        self.trs = trs
        self.b, self.x = b, x

    @property
    def name(self):
        return "lower_trs" if self.trs.lower else "upper_trs"

    def reference(self, exc):
        t = self.trs
        b, x = self.b, self.x
        x[...] = b
        rp, ci, vals = t.factor.row_ptrs, t.factor.col_idxs, t.factor.vals
        order = range(len(x)) if t.lower else range(len(x) - 1, -1, -1)
        for i in order:
            self._solve_row(i, rp, ci, vals, x, t)

    def parallel(self, exc):
        t = self.trs
        b, x = self.b, self.x
        x[...] = b
        rp, ci, vals = t.factor.row_ptrs, t.factor.col_idxs, t.factor.vals
        for level_rows in t.levels:
            # rows of one level are independent: block them across workers
            def solve_block(lo, hi, rows=level_rows):
                for i in rows[lo:hi]:
                    self._solve_row(i, rp, ci, vals, x, t)

            exc.map_blocks(len(level_rows), solve_block)

    def _solve_row(self, i, rp, ci, vals, x, t):
        lo, hi = int(rp[i]), int(rp[i + 1])
        cols = ci[lo:hi]
        off = cols != i
        if off.any():
            x[i] -= vals[lo:hi][off] @ x[cols[off]]
        if not t.unit_diagonal:
            x[i] /= t.diag[i]

    def traffic(self):
        f = self.trs.factor
        vt = f.vals.dtype.itemsize
        it = f.col_idxs.dtype.itemsize
        m = self.b.shape[1]
        nnz = f.nnz
        reads = nnz * vt + nnz * m * vt + (nnz + f.row_ptrs.size) * it \
            + self.b.size * vt
        return Traffic(reads, self.x.size * vt)


class TriangularSolver(LinOp):
    """Exact substitution with a (unit-)triangular CSR factor."""

    def __init__(self, factor: Csr, lower: bool, unit_diagonal=False):
        super().__init__(factor.exec, factor.size)
        self.factor = factor
        self.lower = lower
        self.unit_diagonal = unit_diagonal
        self.diag = None
        if not unit_diagonal:
            self.diag = self._extract_diagonal(factor)
        self.levels = self._dependency_levels(factor, lower)

    @staticmethod
    def _extract_diagonal(factor):
        n = factor.size.rows
        diag = np.zeros(n, dtype=factor.vals.dtype)
        for i in range(n):
            lo, hi = int(factor.row_ptrs[i]), int(factor.row_ptrs[i + 1])
            sel = np.flatnonzero(factor.col_idxs[lo:hi] == i)
            if sel.size:
                diag[i] = factor.vals[lo + sel[0]]
        if np.any(diag == 0):
            bad = int(np.flatnonzero(diag == 0)[0])
            raise Singular(f"zero diagonal entry in row {bad}")
        return diag

    @staticmethod
    def _dependency_levels(factor, lower):
        n = factor.size.rows
        level = np.zeros(n, dtype=np.int64)
        rows = range(n) if lower else range(n - 1, -1, -1)
        for i in rows:
            lo, hi = int(factor.row_ptrs[i]), int(factor.row_ptrs[i + 1])
            deps = factor.col_idxs[lo:hi]
            deps = deps[deps != i]
            if deps.size:
                level[i] = level[deps].max() + 1
        by_level = []
        for lv in range(int(level.max()) + 1 if n else 0):
            by_level.append(np.flatnonzero(level == lv))
        return by_level

    def _apply_impl(self, b, x):
        self.exec.run(TrsKernel(self, b.data, x.data))

    def clone_to(self, target):
        return TriangularSolver(self.factor.clone_to(target), self.lower,
                                self.unit_diagonal)


class LowerTrs(LinOpFactory):
    """Factory for direct forward substitution with a lower-triangular factor."""

    def __init__(self, exc, unit_diagonal=False):
        super().__init__(exc)
        self.unit_diagonal = unit_diagonal

    def _validate(self, a):
        if not a.size.square:
            raise DimensionMismatch("triangular factor must be square")

    def _generate(self, a):
        return TriangularSolver(_as_csr(a), lower=True,
                                unit_diagonal=self.unit_diagonal)


class UpperTrs(LinOpFactory):
    """Factory for direct backward substitution with an upper-triangular factor."""

    def __init__(self, exc, unit_diagonal=False):
        super().__init__(exc)
        self.unit_diagonal = unit_diagonal

    def _validate(self, a):
        if not a.size.square:
            raise DimensionMismatch("triangular factor must be square")

    def _generate(self, a):
        return TriangularSolver(_as_csr(a), lower=False,
                                unit_diagonal=self.unit_diagonal)


def _as_csr(a):
    if isinstance(a, Csr):
        return a
    return a.convert_to(Csr)
