"""Standard test systems used by the benchmarks and the test suite."""

from __future__ import annotations

import numpy as np

from .base import Dim2
from .formats import MatrixData


def tridiagonal(n, lower=-1.0, diag=2.0, upper=-1.0) -> MatrixData:
    rows, cols, vals = [], [], []
    for i in range(n):
        if i > 0 and lower != 0.0:
            rows.append(i), cols.append(i - 1), vals.append(lower)
        rows.append(i), cols.append(i), vals.append(diag)
        if i < n - 1 and upper != 0.0:
            rows.append(i), cols.append(i + 1), vals.append(upper)
    return MatrixData(Dim2(n, n), rows, cols, vals)


def five_point_poisson(grid) -> MatrixData:
    """5-point finite-difference Laplacian on a grid x grid interior mesh
    (dimension grid**2, SPD, diagonal 4, off-diagonals -1)."""
    n = grid * grid
    rows, cols, vals = [], [], []

    def idx(i, j):
        return i * grid + j

    for i in range(grid):
        for j in range(grid):
            me = idx(i, j)
            rows.append(me), cols.append(me), vals.append(4.0)
            for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                ni, nj = i + di, j + dj
                if 0 <= ni < grid and 0 <= nj < grid:
                    rows.append(me), cols.append(idx(ni, nj)), vals.append(-1.0)
    return MatrixData(Dim2(n, n), rows, cols, vals)


def convection_diffusion(n, convection=0.4) -> MatrixData:
    """1-D convection-diffusion stencil: nonsymmetric tridiagonal."""
    return tridiagonal(n, lower=-1.0 - convection, diag=2.0,
                       upper=-1.0 + convection)


def random_sparse(n, density=0.1, seed=0, diag_dominant=True) -> MatrixData:
    """Random sparse matrix with full diagonal; optionally made strictly
    diagonally dominant (which keeps the Krylov test solvers honest)."""
    rng = np.random.default_rng(seed)
    mask = rng.random((n, n)) < density
    np.fill_diagonal(mask, True)
    dense = np.where(mask, rng.uniform(-1.0, 1.0, (n, n)), 0.0)
    if diag_dominant:
        off_sums = np.abs(dense).sum(axis=1) - np.abs(np.diag(dense))
        np.fill_diagonal(dense, off_sums + 1.0)
    return MatrixData.from_dense_array(dense)


def random_spd(n, density=0.2, seed=0) -> MatrixData:
    """Random sparse symmetric positive definite matrix."""
    rng = np.random.default_rng(seed)
    mask = np.triu(rng.random((n, n)) < density / 2)
    dense = np.where(mask, rng.uniform(-1.0, 1.0, (n, n)), 0.0)
    dense = dense + dense.T
    off_sums = np.abs(dense).sum(axis=1) - np.abs(np.diag(dense))
    np.fill_diagonal(dense, off_sums + 1.0)
    return MatrixData.from_dense_array(dense)
