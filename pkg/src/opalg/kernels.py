"""Shared compute kernels.

Each kernel is an :class:`~opalg.executor.Operation` with a sequential
(reference) and a block-parallel variant, plus a declared memory footprint.
Vector operands are dense ``(n, m)`` arrays (``m`` right-hand sides); scalar
operands (``alpha`` and friends) are ``(1, m)``.

Declared traffic follows the accounting ledger used by the solver memory
model (see ``docs/traffic_model.md``): a dot reads both operands and writes
one scalar per column; axpy-like kernels read two vectors and write one;
scale and copy read one and write one; a COO SpMV reads values, the gathered
vector entries, and both index arrays, and writes the output vector once.
"""

from __future__ import annotations

import numpy as np

from .executor import Operation, Traffic


def _vt(arr):
    return arr.dtype.itemsize


def _nbytes(arr):
    return arr.size * arr.dtype.itemsize


class CopyKernel(Operation):
    name = "copy"

    def __init__(self, src, dst):
        self.src, self.dst = src, dst

    def _run(self, exc):
        src, dst = self.src, self.dst
        exc.map_blocks(len(src), lambda lo, hi: dst[lo:hi].__setitem__(
            slice(None), src[lo:hi]))

    reference = parallel = _run

    def traffic(self):
        return Traffic(_nbytes(self.src), _nbytes(self.dst))


class FillKernel(Operation):
    name = "fill"

    def __init__(self, dst, value=0.0):
        self.dst, self.value = dst, value

    def _run(self, exc):
        exc.map_blocks(len(self.dst), lambda lo, hi: self.dst[lo:hi].fill(self.value))

    reference = parallel = _run

    def traffic(self):
        return Traffic(0, _nbytes(self.dst))


class ScaleKernel(Operation):
    """x <- alpha * x (column-wise alpha)."""

    name = "scale"

    def __init__(self, alpha, x):
        self.alpha, self.x = alpha, x

    def _run(self, exc):
        a, x = self.alpha, self.x
        exc.map_blocks(len(x), lambda lo, hi: np.multiply(x[lo:hi], a, out=x[lo:hi]))

    reference = parallel = _run

    def traffic(self):
        return Traffic(_nbytes(self.x), _nbytes(self.x))


class AddScaledKernel(Operation):
    """y <- y + alpha * x (column-wise alpha)."""

    name = "add_scaled"

    def __init__(self, alpha, x, y):
        self.alpha, self.x, self.y = alpha, x, y

    def _run(self, exc):
        a, x, y = self.alpha, self.x, self.y

        def body(lo, hi):
            y[lo:hi] += a * x[lo:hi]

        exc.map_blocks(len(x), body)

    reference = parallel = _run

    def traffic(self):
        return Traffic(_nbytes(self.x) + _nbytes(self.y), _nbytes(self.y))


class DotKernel(Operation):
    """out[0, j] <- sum_i x[i, j] * y[i, j]."""

    name = "dot"

    def __init__(self, x, y, out):
        self.x, self.y, self.out = x, y, out

    def _run(self, exc):
        x, y = self.x, self.y
        acc = exc.sum_blocks(len(x), lambda lo, hi: (x[lo:hi] * y[lo:hi]).sum(axis=0))
        self.out[0, :] = acc

    reference = parallel = _run

    def traffic(self):
        return Traffic(_nbytes(self.x) + _nbytes(self.y), _nbytes(self.out))


class Norm2Kernel(Operation):
    """out[0, j] <- euclidean norm of column j."""

    name = "norm2"

    def __init__(self, x, out):
        self.x, self.out = x, out

    def _run(self, exc):
        x = self.x
        acc = exc.sum_blocks(len(x), lambda lo, hi: (x[lo:hi] * x[lo:hi]).sum(axis=0))
        self.out[0, :] = np.sqrt(acc)

    reference = parallel = _run

    def traffic(self):
        return Traffic(_nbytes(self.x), _nbytes(self.out))


class ElementwiseKernel(Operation):
    """Generic two-input elementwise kernel for the stream benchmark suite."""

    def __init__(self, name, fn, inputs, out):
        self.name = name
        self.fn = fn
        self.inputs = inputs
        self.out = out

    def _run(self, exc):
        fn, out, inputs = self.fn, self.out, self.inputs

        def body(lo, hi):
            out[lo:hi] = fn(*(a[lo:hi] for a in inputs))

        exc.map_blocks(len(out), body)

    reference = parallel = _run

    def traffic(self):
        return Traffic(sum(_nbytes(a) for a in self.inputs), _nbytes(self.out))


class CooSpmvKernel(Operation):
    """x <- A b for COO-format A (entries sorted by row).

    The parallel variant assigns contiguous row segments to workers; each
    worker accumulates its own rows' entries in entry order, so results are
    bitwise identical to the sequential kernel.
    """

    name = "coo_spmv"

    def __init__(self, rows, cols, vals, b, x):
        self.rows, self.cols, self.vals = rows, cols, vals
        self.b, self.x = b, x

    def _run(self, exc):
        rows, cols, vals, b, x = self.rows, self.cols, self.vals, self.b, self.x

        def body(lo, hi):
            x[lo:hi] = 0.0
            e0 = np.searchsorted(rows, lo, side="left")
            e1 = np.searchsorted(rows, hi, side="left")
            if e0 == e1:
                return
            prod = vals[e0:e1, None] * b[cols[e0:e1]]
            np.add.at(x[lo:hi], (rows[e0:e1] - lo).astype(np.intp), prod)

        exc.map_blocks(len(x), body)

    reference = parallel = _run

    def traffic(self):
        nnz = self.vals.size
        m = self.b.shape[1]
        vt = _vt(self.vals)
        it = _vt(self.rows)
        reads = nnz * vt + nnz * m * vt + 2 * nnz * it
        return Traffic(reads, _nbytes(self.x))


class CooAdvSpmvKernel(Operation):
    """x <- alpha * A b + beta * x for COO-format A.

    Modeled as a beta-scaling pass plus an accumulation pass over the sorted
    entries; charged 4 vector reads and 2 vector writes plus the entry
    streams (see docs/traffic_model.md).
    """

    name = "coo_spmv_advanced"

    def __init__(self, rows, cols, vals, alpha, b, beta, x):
        self.rows, self.cols, self.vals = rows, cols, vals
        self.alpha, self.beta = alpha, beta
        self.b, self.x = b, x

    def _run(self, exc):
        rows, cols, vals = self.rows, self.cols, self.vals
        alpha, beta, b, x = self.alpha, self.beta, self.b, self.x

        def body(lo, hi):
            np.multiply(x[lo:hi], beta, out=x[lo:hi])
            e0 = np.searchsorted(rows, lo, side="left")
            e1 = np.searchsorted(rows, hi, side="left")
            if e0 == e1:
                return
            prod = alpha * (vals[e0:e1, None] * b[cols[e0:e1]])
            np.add.at(x[lo:hi], (rows[e0:e1] - lo).astype(np.intp), prod)

        exc.map_blocks(len(x), body)

    reference = parallel = _run

    def traffic(self):
        nnz = self.vals.size
        m = self.b.shape[1]
        vt = _vt(self.vals)
        it = _vt(self.rows)
        reads = nnz * vt + nnz * m * vt + 2 * nnz * it + 4 * _nbytes(self.x)
        return Traffic(reads, 2 * _nbytes(self.x))


class CooResidualKernel(Operation):
    """r <- b - A x for COO-format A, fused with the copy of b."""

    name = "coo_residual"

    def __init__(self, rows, cols, vals, x, b, r):
        self.rows, self.cols, self.vals = rows, cols, vals
        self.x, self.b, self.r = x, b, r

    def _run(self, exc):
        rows, cols, vals = self.rows, self.cols, self.vals
        x, b, r = self.x, self.b, self.r

        def body(lo, hi):
            r[lo:hi] = b[lo:hi]
            e0 = np.searchsorted(rows, lo, side="left")
            e1 = np.searchsorted(rows, hi, side="left")
            if e0 == e1:
                return
            prod = vals[e0:e1, None] * x[cols[e0:e1]]
            np.subtract.at(r[lo:hi], (rows[e0:e1] - lo).astype(np.intp), prod)

        exc.map_blocks(len(r), body)

    reference = parallel = _run

    def traffic(self):
        nnz = self.vals.size
        m = self.x.shape[1]
        vt = _vt(self.vals)
        it = _vt(self.rows)
        reads = _nbytes(self.b) + nnz * vt + nnz * m * vt + 2 * nnz * it
        return Traffic(reads, _nbytes(self.r))


class CsrSpmvKernel(Operation):
    name = "csr_spmv"

    def __init__(self, row_ptrs, col_idxs, vals, b, x):
        self.row_ptrs, self.col_idxs, self.vals = row_ptrs, col_idxs, vals
        self.b, self.x = b, x

    def _run(self, exc):
        rp, ci, vals, b, x = self.row_ptrs, self.col_idxs, self.vals, self.b, self.x

        def body(lo, hi):
            x[lo:hi] = csr_row_sums(vals, ci, rp, b, lo, hi)

        exc.map_blocks(len(x), body)

    reference = parallel = _run

    def traffic(self):
        nnz = self.vals.size
        m = self.b.shape[1]
        vt = _vt(self.vals)
        it = _vt(self.col_idxs)
        reads = nnz * vt + nnz * m * vt + (nnz + self.row_ptrs.size) * it
        return Traffic(reads, _nbytes(self.x))


def csr_row_sums(vals, col_idxs, row_ptrs, b, lo, hi):
    """Row sums of vals * b[cols] for rows [lo, hi). Left-to-right accumulation
    within each row (deterministic regardless of partition)."""
    e0, e1 = int(row_ptrs[lo]), int(row_ptrs[hi])
    out = np.zeros((hi - lo, b.shape[1]), dtype=b.dtype)
    if e0 == e1:
        return out
    prod = vals[e0:e1, None] * b[col_idxs[e0:e1]]
    counts = np.diff(row_ptrs[lo:hi + 1])
    nonempty = np.flatnonzero(counts > 0)
    starts = row_ptrs[lo + nonempty] - e0
    out[nonempty] = np.add.reduceat(prod, starts.astype(np.intp), axis=0)
    return out


class DenseSpmvKernel(Operation):
    name = "dense_spmv"

    def __init__(self, a, b, x):
        self.a, self.b, self.x = a, b, x

    def _run(self, exc):
        a, b, x = self.a, self.b, self.x
        exc.map_blocks(len(x), lambda lo, hi: np.matmul(a[lo:hi], b, out=x[lo:hi]))

    reference = parallel = _run

    def traffic(self):
        return Traffic(_nbytes(self.a) + _nbytes(self.b), _nbytes(self.x))


class StencilApplyKernel(Operation):
    """Tridiagonal stencil apply: x_i = l*b_{i-1} + c*b_i + r*b_{i+1}."""

    name = "stencil_apply"

    def __init__(self, coeffs, b, x):
        self.coeffs, self.b, self.x = coeffs, b, x

    def _run(self, exc):
        left, center, right = self.coeffs
        b, x = self.b, self.x
        n = len(x)

        def body(lo, hi):
            x[lo:hi] = center * b[lo:hi]
            llo = max(lo, 1)
            if llo < hi:
                x[llo:hi] += left * b[llo - 1:hi - 1]
            rhi = min(hi, n - 1)
            if lo < rhi:
                x[lo:rhi] += right * b[lo + 1:rhi + 1]

        exc.map_blocks(n, body)

    reference = parallel = _run

    def traffic(self):
        vt = _vt(self.b)
        return Traffic(3 * _nbytes(self.b) + 3 * vt, _nbytes(self.x))
