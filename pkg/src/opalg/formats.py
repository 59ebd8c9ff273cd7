"""Concrete matrix operators: Dense, CSR, COO, and a matrix-free stencil.

``MatrixData`` is the interchange form between file I/O, assembly, and format
conversion: a size plus coordinate triples, canonicalized to (row, col) order
with duplicate coordinates summed.
"""

from __future__ import annotations

import numpy as np

from . import config
from .base import Dim2, LinOp
from .errors import DimensionMismatch, Unsupported
from .executor import Executor
from .kernels import (AddScaledKernel, CooAdvSpmvKernel, CooSpmvKernel,
                      CopyKernel, CsrSpmvKernel, DenseSpmvKernel, DotKernel,
                      FillKernel, Norm2Kernel, ScaleKernel, StencilApplyKernel)


class MatrixData:
    """Coordinate-form matrix data.

    Canonical order is sorted by (row, col); duplicates are summed during
    canonicalization.
    """

    def __init__(self, size, rows=(), cols=(), vals=()):
        self.size = size if isinstance(size, Dim2) else Dim2(*size)
        self.rows = np.asarray(rows, dtype=np.int64)
        self.cols = np.asarray(cols, dtype=np.int64)
        self.vals = np.asarray(vals, dtype=np.float64)
        if not (self.rows.size == self.cols.size == self.vals.size):
            raise DimensionMismatch("triple arrays must have equal length")

    @property
    def nnz(self):
        return int(self.vals.size)

    def canonicalize(self) -> "MatrixData":
        """Sort by (row, col) and sum duplicate coordinates."""
        if self.nnz == 0:
            return MatrixData(self.size)
        order = np.lexsort((self.cols, self.rows))
        r, c, v = self.rows[order], self.cols[order], self.vals[order]
        keep = np.ones(r.size, dtype=bool)
        keep[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
        if not keep.all():
            group = np.cumsum(keep) - 1
            summed = np.zeros(int(group[-1]) + 1, dtype=v.dtype)
            np.add.at(summed, group, v)
            r, c, v = r[keep], c[keep], summed
        return MatrixData(self.size, r, c, v)

    def to_dense_array(self):
        out = np.zeros(tuple(self.size), dtype=np.float64)
        np.add.at(out, (self.rows, self.cols), self.vals)
        return out

    @classmethod
    def from_dense_array(cls, arr, drop_zeros=True):
        arr = np.asarray(arr, dtype=np.float64)
        if drop_zeros:
            rows, cols = np.nonzero(arr)
        else:
            rows, cols = np.indices(arr.shape).reshape(2, -1)
        return cls(Dim2(*arr.shape), rows, cols, arr[rows, cols])


class Dense(LinOp):
    """Row-major dense matrix; doubles as the vector type (n x m columns)."""

    is_dense = True

    def __init__(self, exc: Executor, data=None, size=None, value_dtype=None):
        dtype = value_dtype or config.DEFAULT_VALUE_DTYPE
        if data is not None:
            arr = np.array(data, dtype=dtype, ndmin=2)
        else:
            arr = exc.alloc(tuple(size), dtype)
        super().__init__(exc, Dim2(*arr.shape))
        self.data = arr

    @property
    def stride(self):
        return self.data.strides[0] // self.data.dtype.itemsize

    # -- constructors ---------------------------------------------------

    @classmethod
    def zeros(cls, exc, rows, cols=1, value_dtype=None):
        out = cls(exc, size=(rows, cols), value_dtype=value_dtype)
        out.data[...] = 0.0
        return out

    @classmethod
    def vector(cls, exc, values, value_dtype=None):
        """Column vector from a 1-D sequence."""
        arr = np.asarray(values, dtype=value_dtype or config.DEFAULT_VALUE_DTYPE)
        return cls(exc, arr.reshape(-1, 1))

    @classmethod
    def wrap(cls, exc, arr):
        """Dense view over an existing buffer (no copy)."""
        obj = cls.__new__(cls)
        LinOp.__init__(obj, exc, Dim2(*arr.shape))
        obj.data = arr
        return obj

    def like(self, rows, cols):
        """Uninitialized dense of the given shape on this executor/dtype."""
        return Dense(self.exec, size=(rows, cols), value_dtype=self.data.dtype)

    def clone_to(self, target):
        out = Dense(target, size=tuple(self.size), value_dtype=self.data.dtype)
        target.run(CopyKernel(self.data, out.data))
        return out

    # -- BLAS-like ops (executor kernels; counted) ------------------------

    def fill(self, value=0.0):
        self.exec.run(FillKernel(self.data, value))

    def copy_from(self, other: "Dense"):
        self.exec.run(CopyKernel(other.data, self.data))

    def scale(self, alpha):
        self.exec.run(ScaleKernel(_coeff(alpha), self.data))

    def add_scaled(self, alpha, x: "Dense"):
        self.exec.run(AddScaledKernel(_coeff(alpha), x.data, self.data))

    def compute_dot(self, other: "Dense", out: "Dense"):
        self.exec.run(DotKernel(self.data, other.data, out.data))

    def compute_norm2(self, out: "Dense"):
        self.exec.run(Norm2Kernel(self.data, out.data))

    def dot(self, other):
        out = self.like(1, self.size.cols)
        self.compute_dot(other, out)
        return out.data[0].copy()

    def norm2(self):
        out = self.like(1, self.size.cols)
        self.compute_norm2(out)
        return out.data[0].copy()

    # -- operator interface ------------------------------------------------

    def _apply_impl(self, b, x):
        self.exec.run(DenseSpmvKernel(self.data, b.data, x.data))

    def convert_to(self, kind):
        return convert(self, kind)

    def to_data(self) -> MatrixData:
        return MatrixData.from_dense_array(self.data)


def _coeff(alpha):
    """Normalize a scalar multiplier: plain number or 1xm Dense."""
    if isinstance(alpha, Dense):
        return alpha.data[0:1, :]
    return alpha


class Csr(LinOp):
    """Compressed sparse row. Columns are sorted within each row."""

    def __init__(self, exc, size, row_ptrs, col_idxs, vals,
                 index_dtype=None, value_dtype=None):
        super().__init__(exc, size)
        it = index_dtype or config.DEFAULT_INDEX_DTYPE
        vt = value_dtype or config.DEFAULT_VALUE_DTYPE
        self.row_ptrs = np.asarray(row_ptrs, dtype=it)
        self.col_idxs = np.asarray(col_idxs, dtype=it)
        self.vals = np.asarray(vals, dtype=vt)
        self._check_structure()

    def _check_structure(self):
        rows, cols = self.size
        rp = self.row_ptrs
        if rp.size != rows + 1 or rp[0] != 0 or rp[-1] != self.vals.size:
            raise DimensionMismatch("bad row_ptrs")
        if np.any(np.diff(rp) < 0):
            raise DimensionMismatch("row_ptrs must be non-decreasing")
        if self.col_idxs.size and (self.col_idxs.min() < 0
                                   or self.col_idxs.max() >= cols):
            raise DimensionMismatch("column index out of range")

    @property
    def nnz(self):
        return int(self.vals.size)

    @classmethod
    def from_data(cls, exc, data: MatrixData, **kw):
        data = data.canonicalize()
        rows, _ = data.size
        row_ptrs = np.zeros(rows + 1, dtype=np.int64)
        np.add.at(row_ptrs, data.rows + 1, 1)
        np.cumsum(row_ptrs, out=row_ptrs)
        return cls(exc, data.size, row_ptrs, data.cols, data.vals, **kw)

    def to_data(self) -> MatrixData:
        rows = np.repeat(np.arange(self.size.rows, dtype=np.int64),
                         np.diff(self.row_ptrs))
        return MatrixData(self.size, rows, self.col_idxs.astype(np.int64),
                          self.vals.astype(np.float64))

    def _apply_impl(self, b, x):
        self.exec.run(CsrSpmvKernel(self.row_ptrs, self.col_idxs, self.vals,
                                    b.data, x.data))

    def convert_to(self, kind):
        return convert(self, kind)

    def clone_to(self, target):
        return Csr(target, self.size, self.row_ptrs.copy(), self.col_idxs.copy(),
                   self.vals.copy(), index_dtype=self.col_idxs.dtype,
                   value_dtype=self.vals.dtype)


class Coo(LinOp):
    """Coordinate format, entries sorted lexicographically by (row, col)."""

    def __init__(self, exc, size, row_idxs, col_idxs, vals,
                 index_dtype=None, value_dtype=None):
        super().__init__(exc, size)
        it = index_dtype or config.DEFAULT_INDEX_DTYPE
        vt = value_dtype or config.DEFAULT_VALUE_DTYPE
        self.row_idxs = np.asarray(row_idxs, dtype=it)
        self.col_idxs = np.asarray(col_idxs, dtype=it)
        self.vals = np.asarray(vals, dtype=vt)

    @property
    def nnz(self):
        return int(self.vals.size)

    @classmethod
    def from_data(cls, exc, data: MatrixData, **kw):
        data = data.canonicalize()
        return cls(exc, data.size, data.rows, data.cols, data.vals, **kw)

    def to_data(self) -> MatrixData:
        return MatrixData(self.size, self.row_idxs.astype(np.int64),
                          self.col_idxs.astype(np.int64),
                          self.vals.astype(np.float64))

    def _apply_impl(self, b, x):
        self.exec.run(CooSpmvKernel(self.row_idxs, self.col_idxs, self.vals,
                                    b.data, x.data))

    def _apply_advanced_impl(self, alpha, b, beta, x):
        self.exec.run(CooAdvSpmvKernel(self.row_idxs, self.col_idxs, self.vals,
                                       _coeff(alpha), b.data, _coeff(beta),
                                       x.data))

    def convert_to(self, kind):
        return convert(self, kind)

    def clone_to(self, target):
        return Coo(target, self.size, self.row_idxs.copy(), self.col_idxs.copy(),
                   self.vals.copy(), index_dtype=self.col_idxs.dtype,
                   value_dtype=self.vals.dtype)


class StencilMatrix(LinOp):
    """Matrix-free 3-point stencil operator (tridiagonal action)."""

    def __init__(self, exc, n, left, center, right, value_dtype=None):
        super().__init__(exc, Dim2(n, n))
        vt = value_dtype or config.DEFAULT_VALUE_DTYPE
        self.coefficients = np.asarray([left, center, right], dtype=vt)

    def _apply_impl(self, b, x):
        self.exec.run(StencilApplyKernel(self.coefficients, b.data, x.data))

    def to_data(self) -> MatrixData:
        n = self.size.rows
        left, center, right = (float(c) for c in self.coefficients)
        rows, cols, vals = [], [], []
        for i in range(n):
            if i > 0:
                rows.append(i), cols.append(i - 1), vals.append(left)
            rows.append(i), cols.append(i), vals.append(center)
            if i < n - 1:
                rows.append(i), cols.append(i + 1), vals.append(right)
        return MatrixData(self.size, rows, cols, vals)

    def convert_to(self, kind):
        if kind is Csr or kind == "csr":
            return Csr.from_data(self.exec, self.to_data())
        raise Unsupported("stencil matrices only convert to CSR")

    def clone_to(self, target):
        return StencilMatrix(target, self.size.rows, *map(float, self.coefficients),
                             value_dtype=self.coefficients.dtype)


_FORMAT_NAMES = {"dense": Dense, "csr": Csr, "coo": Coo}


def convert(a, target):
    """Value-equivalent copy of ``a`` in another format.

    Dense-to-sparse drops explicit zeros. Supported pairs are all of
    {Dense, Csr, Coo} plus Stencil -> Csr.
    """
    if isinstance(target, str):
        try:
            target = _FORMAT_NAMES[target.lower()]
        except KeyError:
            raise Unsupported(f"unknown format {target!r}") from None
    if isinstance(a, StencilMatrix):
        return a.convert_to(target)
    if target not in (Dense, Csr, Coo):
        raise Unsupported(f"no conversion to {target}")
    data = a.to_data().canonicalize()
    if target is Dense:
        return Dense(a.exec, data.to_dense_array())
    return target.from_data(a.exec, data)


def matrix_from_data(exc, data: MatrixData, fmt="csr"):
    fmt_cls = _FORMAT_NAMES[fmt.lower()] if isinstance(fmt, str) else fmt
    if fmt_cls is Dense:
        return Dense(exc, data.to_dense_array())
    return fmt_cls.from_data(exc, data)
