import numpy as np
import pytest

import opalg
from opalg.problems import five_point_poisson, random_sparse, random_spd, tridiagonal


@pytest.fixture
def ref():
    return opalg.ReferenceExecutor()


@pytest.fixture
def par():
    return opalg.ParallelExecutor(workers=4)


@pytest.fixture
def instr():
    return opalg.create_executor("instrumented")


@pytest.fixture(scope="session")
def poisson961():
    return five_point_poisson(31)


def dense_solve(data, bvec):
    """Dense-factorization oracle for Ax = b."""
    return np.linalg.solve(data.to_dense_array(), bvec)


def make_system(exc, data, fmt="csr", rhs=None, seed=0):
    a = opalg.matrix_from_data(exc, data, fmt)
    n = a.size.rows
    if rhs is None:
        rhs = np.random.default_rng(seed).standard_normal(n)
    b = opalg.Dense.vector(exc, rhs)
    x = opalg.Dense.zeros(exc, n, 1)
    return a, b, x


__all__ = ["dense_solve", "make_system", "tridiagonal", "random_sparse",
           "random_spd", "five_point_poisson"]
