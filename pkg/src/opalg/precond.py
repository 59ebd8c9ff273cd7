"""Preconditioners: block-Jacobi and incomplete-LU.

Block-Jacobi inverts the diagonal blocks with Gauss-Jordan elimination with
partial pivoting. In adaptive mode each inverted block whose infinity-norm
condition number is below the threshold is stored in reduced (32-bit)
precision; storage precision is decoupled from arithmetic precision, which
stays 64-bit (blocks are widened for the multiply).

ParILU computes approximate ILU(0) factors with deterministic Jacobi-style
fixed-point sweeps over the level-0 pattern: every sweep updates all entries
from the previous sweep's values, so the result is independent of the update
order and identical across executors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import LinOp, LinOpFactory
from .errors import DimensionMismatch, Singular
from .executor import Operation, Traffic
from .formats import Csr
from .solvers.triangular import LowerTrs, UpperTrs


def gauss_jordan_inverse(block):
    """Explicit inverse by Gauss-Jordan elimination with partial pivoting.

    Returns None when a pivot vanishes (singular block).
    """
    bs = block.shape[0]
    aug = np.hstack([np.asarray(block, dtype=np.float64),
                     np.eye(bs, dtype=np.float64)])
    for col in range(bs):
        piv = col + int(np.argmax(np.abs(aug[col:, col])))
        if aug[piv, col] == 0.0:
            return None
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] /= aug[col, col]
        factor = aug[:, col].copy()
        factor[col] = 0.0
        aug -= np.outer(factor, aug[col])
    return aug[:, bs:]


def uniform_block_boundaries(n, block_size):
    """Block start rows for uniform blocks (last block may be smaller)."""
    return list(range(0, n, int(block_size)))


@dataclass
class _Block:
    start: int
    inv: np.ndarray          # stored inverse (possibly float32)
    cond: float


class _JacobiGenerateKernel(Operation):
    name = "jacobi_generate"

    def __init__(self, dense_blocks, starts, adaptive, threshold, out):
        self.dense_blocks = dense_blocks
        self.starts = starts
        self.adaptive = adaptive
        self.threshold = threshold
        self.out = out

    def _run(self, exc):
        blocks = self.dense_blocks
        out = self.out

        def invert_range(lo, hi):
            for idx in range(lo, hi):
                block = blocks[idx]
                inv = gauss_jordan_inverse(block)
                if inv is None:
                    raise Singular(f"diagonal block {idx} is singular")
                cond = float(np.abs(block).sum(axis=1).max()
                             * np.abs(inv).sum(axis=1).max())
                store = inv
                if self.adaptive and cond < self.threshold:
                    store = inv.astype(np.float32)
                out[idx] = _Block(self.starts[idx], store, cond)

        exc.map_blocks(len(blocks), invert_range)

    reference = parallel = _run

    def traffic(self):
        vt = 8
        elems = sum(b.size for b in self.dense_blocks)
        return Traffic(elems * vt, 2 * elems * vt)


class _JacobiApplyKernel(Operation):
    """z_block = inv_block @ r_block, independently per block."""

    name = "jacobi_apply"

    def __init__(self, blocks, r, z):
        self.blocks, self.r, self.z = blocks, r, z

    def _run(self, exc):
        r, z = self.r, self.z
        blocks = self.blocks

        def apply_range(lo, hi):
            for idx in range(lo, hi):
                blk = blocks[idx]
                end = blk.start + blk.inv.shape[0]
                inv = blk.inv.astype(np.float64, copy=False)
                z[blk.start:end] = inv @ r[blk.start:end]

        exc.map_blocks(len(blocks), apply_range)

    reference = parallel = _run

    def traffic(self):
        m = self.r.shape[1]
        stored = sum(b.inv.size * b.inv.dtype.itemsize for b in self.blocks)
        vt = self.r.dtype.itemsize
        return Traffic(stored + self.r.size * vt, self.z.size * vt)


class JacobiOperator(LinOp):
    """Block-diagonal preconditioner holding the inverted diagonal blocks."""

    def __init__(self, exc, size, blocks):
        super().__init__(exc, size)
        self.blocks = blocks

    @property
    def block_precisions(self):
        return [("reduced" if b.inv.dtype == np.float32 else "full")
                for b in self.blocks]

    @property
    def block_conditions(self):
        return [b.cond for b in self.blocks]

    def stored_inverse(self, idx):
        return self.blocks[idx].inv

    def _apply_impl(self, b, x):
        self.exec.run(_JacobiApplyKernel(self.blocks, b.data, x.data))

    def clone_to(self, target):
        blocks = [_Block(b.start, b.inv.copy(), b.cond) for b in self.blocks]
        return JacobiOperator(target, self.size, blocks)


class Jacobi(LinOpFactory):
    """Block-Jacobi factory.

    Blocks are defined by explicit start rows (``block_boundaries``) or a
    uniform ``block_size`` (default 1, i.e. diagonal scaling). Natural-block
    detection is out of scope: boundaries must be given explicitly.
    """

    def __init__(self, exc, block_size=1, block_boundaries=None,
                 adaptive_precision=False, condition_threshold=1e6):
        super().__init__(exc)
        self.block_size = block_size
        self.block_boundaries = block_boundaries
        self.adaptive_precision = adaptive_precision
        self.condition_threshold = condition_threshold

    def _validate(self, a):
        if not a.size.square:
            raise DimensionMismatch("block-Jacobi needs a square matrix")
        n = a.size.rows
        starts = self._starts(n)
        if not starts or starts[0] != 0:
            raise DimensionMismatch("block boundaries must start at row 0")
        if any(s2 <= s1 for s1, s2 in zip(starts, starts[1:])) \
                or (n and starts[-1] >= n):
            raise DimensionMismatch("invalid block boundaries")

    def _starts(self, n):
        if self.block_boundaries is not None:
            return [int(s) for s in self.block_boundaries]
        return uniform_block_boundaries(n, self.block_size)

    def _generate(self, a):
        csr = a if isinstance(a, Csr) else a.convert_to(Csr)
        n = csr.size.rows
        starts = self._starts(n)
        ends = starts[1:] + [n]
        dense_blocks = [_extract_block(csr, s, e) for s, e in zip(starts, ends)]
        out = [None] * len(dense_blocks)
        a.exec.run(_JacobiGenerateKernel(dense_blocks, starts,
                                         self.adaptive_precision,
                                         self.condition_threshold, out))
        return JacobiOperator(a.exec, a.size, out)


def _extract_block(csr, start, end):
    bs = end - start
    block = np.zeros((bs, bs), dtype=np.float64)
    for i in range(start, end):
        lo, hi = int(csr.row_ptrs[i]), int(csr.row_ptrs[i + 1])
        cols = csr.col_idxs[lo:hi]
        sel = (cols >= start) & (cols < end)
        block[i - start, cols[sel] - start] = csr.vals[lo:hi][sel]
    return block


# ---------------------------------------------------------------------------
# ParILU factorization
# ---------------------------------------------------------------------------

@dataclass
class IluFactors:
    """Level-0 incomplete factors: unit-lower L and upper U, both CSR with the
    sparsity of tril/triu of A (diagonals stored explicitly)."""

    l: Csr
    u: Csr

    def defect_on_pattern(self, a: Csr):
        """Frobenius norm of (L U - A) restricted to the sparsity of A."""
        lu = self.l.to_data().to_dense_array() @ self.u.to_data().to_dense_array()
        ad = a.to_data()
        diff = lu[ad.rows, ad.cols] - ad.vals
        return float(np.linalg.norm(diff))


class _ParIluSweepPlan:
    """Precomputed update schedule for the Jacobi-style sweeps.

    For every stored entry (i, j) the plan holds the index pairs of the
    l_ik / u_kj products feeding its update.
    """

    def __init__(self, a: Csr):
        n = a.size.rows
        self.n = n
        lower_rows, lower_cols, lower_vals = [], [], []
        upper_rows, upper_cols, upper_vals = [], [], []
        diag = np.zeros(n)
        for i in range(n):
            lo, hi = int(a.row_ptrs[i]), int(a.row_ptrs[i + 1])
            for p in range(lo, hi):
                jj = int(a.col_idxs[p])
                v = float(a.vals[p])
                if jj == i:
                    diag[i] = v
                if jj <= i:
                    lower_rows.append(i), lower_cols.append(jj), lower_vals.append(v)
                if jj >= i:
                    upper_rows.append(i), upper_cols.append(jj), upper_vals.append(v)
        if np.any(diag == 0):
            bad = int(np.flatnonzero(diag == 0)[0])
            raise Singular(f"zero diagonal at row {bad}")

        self.l_rows = np.asarray(lower_rows)
        self.l_cols = np.asarray(lower_cols)
        self.a_lower = np.asarray(lower_vals)
        self.u_rows = np.asarray(upper_rows)
        self.u_cols = np.asarray(upper_cols)
        self.a_upper = np.asarray(upper_vals)
        self.diag = diag

        l_index = {(int(r), int(c)): k for k, (r, c)
                   in enumerate(zip(self.l_rows, self.l_cols))}
        u_index = {(int(r), int(c)): k for k, (r, c)
                   in enumerate(zip(self.u_rows, self.u_cols))}
        self.u_diag_pos = np.asarray([u_index[(j, j)] for j in range(n)])

        def pairs(i, j):
            ks = [k for k in range(min(i, j))
                  if (i, k) in l_index and (k, j) in u_index]
            return (np.asarray([l_index[(i, k)] for k in ks], dtype=np.int64),
                    np.asarray([u_index[(k, j)] for k in ks], dtype=np.int64))

        self.l_pairs = [pairs(int(i), int(j))
                        for i, j in zip(self.l_rows, self.l_cols)]
        self.u_pairs = [pairs(int(i), int(j))
                        for i, j in zip(self.u_rows, self.u_cols)]

    def initial_values(self):
        # L scaled by the diagonal (unit-lower convention), U = triu(A)
        lvals = self.a_lower / self.diag[self.l_cols]
        lvals[self.l_rows == self.l_cols] = 1.0
        return lvals, self.a_upper.copy()


class _ParIluSweepKernel(Operation):
    name = "parilu_sweep"

    def __init__(self, plan, lvals, uvals):
        self.plan = plan
        self.lvals, self.uvals = lvals, uvals

    def _run(self, exc):
        plan = self.plan
        l_old = self.lvals.copy()
        u_old = self.uvals.copy()
        lv, uv = self.lvals, self.uvals

        def update_lower(lo, hi):
            for e in range(lo, hi):
                i, j = int(plan.l_rows[e]), int(plan.l_cols[e])
                if i == j:
                    continue
                li, ui = plan.l_pairs[e]
                s = l_old[li] @ u_old[ui] if li.size else 0.0
                lv[e] = (plan.a_lower[e] - s) / u_old[plan.u_diag_pos[j]]

        def update_upper(lo, hi):
            for e in range(lo, hi):
                li, ui = plan.u_pairs[e]
                s = l_old[li] @ u_old[ui] if li.size else 0.0
                uv[e] = plan.a_upper[e] - s

        exc.map_blocks(len(lv), update_lower)
        exc.map_blocks(len(uv), update_upper)

    reference = parallel = _run

    def traffic(self):
        vt = 8
        touched = self.lvals.size + self.uvals.size
        return Traffic(2 * touched * vt, touched * vt)


def parilu_generate(a: Csr, sweeps=5) -> IluFactors:
    """Approximate ILU(0) factors after ``sweeps`` fixed-point sweeps.

    ``sweeps=0`` returns the initialization (scaled triangles of A). The
    fixed point is the exact ILU(0) factorization; with Jacobi-style sweeps
    the entries converge level by level along their dependency chains, so
    about two sweeps per elimination level are needed for exactness
    (sweeps >= 2n is always enough).
    """
    exc = a.exec
    plan = _ParIluSweepPlan(a)
    lvals, uvals = plan.initial_values()
    for _ in range(int(sweeps)):
        exc.run(_ParIluSweepKernel(plan, lvals, uvals))

    n = a.size.rows
    ldata_rows, lptr = plan.l_rows, np.zeros(n + 1, dtype=np.int64)
    np.add.at(lptr, ldata_rows + 1, 1)
    np.cumsum(lptr, out=lptr)
    uptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(uptr, plan.u_rows + 1, 1)
    np.cumsum(uptr, out=uptr)
    lower = Csr(exc, a.size, lptr, plan.l_cols, lvals)
    upper = Csr(exc, a.size, uptr, plan.u_cols, uvals)
    return IluFactors(lower, upper)


class ParIlu(LinOpFactory):
    """Factorization factory producing :class:`IluFactors`."""

    def __init__(self, exc, sweeps=5):
        super().__init__(exc)
        self.sweeps = sweeps

    def _validate(self, a):
        if not a.size.square:
            raise DimensionMismatch("factorization needs a square matrix")

    def _generate(self, a):
        csr = a if isinstance(a, Csr) else a.convert_to(Csr)
        return parilu_generate(csr, self.sweeps)


class IluPreconditioner(LinOp):
    """Applies z = U^-1 (L^-1 r) through the configured triangular solvers."""

    def __init__(self, l_solver, u_solver):
        super().__init__(l_solver.exec, l_solver.size)
        self.l_solver = l_solver
        self.u_solver = u_solver

    def _apply_impl(self, b, x):
        tmp = b.like(*b.data.shape)
        self.l_solver.apply(b, tmp)
        self.u_solver.apply(tmp, x)

    def clone_to(self, target):
        return IluPreconditioner(self.l_solver.clone_to(target),
                                 self.u_solver.clone_to(target))


class Ilu(LinOpFactory):
    """ILU preconditioner factory.

    ``generate`` accepts either the system matrix (factors are computed
    internally via ParILU) or pre-generated :class:`IluFactors`. The solvers
    for the two factors default to the direct triangular solvers and can be
    swapped for any solver factory (e.g. an iterative one).
    """

    def __init__(self, exc, l_solver_factory=None, u_solver_factory=None,
                 sweeps=5):
        super().__init__(exc)
        self.l_solver_factory = l_solver_factory or LowerTrs(exc, unit_diagonal=True)
        self.u_solver_factory = u_solver_factory or UpperTrs(exc)
        self.sweeps = sweeps

    def _validate(self, a):
        if isinstance(a, IluFactors):
            return
        if not a.size.square:
            raise DimensionMismatch("ILU needs a square matrix")

    def generate(self, system_matrix):
        if isinstance(system_matrix, IluFactors):
            factors = system_matrix
            return IluPreconditioner(
                self.l_solver_factory.generate(factors.l),
                self.u_solver_factory.generate(factors.u))
        return super().generate(system_matrix)

    def _generate(self, a):
        csr = a if isinstance(a, Csr) else a.convert_to(Csr)
        factors = parilu_generate(csr, self.sweeps)
        return IluPreconditioner(
            self.l_solver_factory.generate(factors.l),
            self.u_solver_factory.generate(factors.u))
