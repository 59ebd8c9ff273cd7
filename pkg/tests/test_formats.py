import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import opalg
from opalg import Coo, Csr, Dense, Dim2, MatrixData, StencilMatrix, Unsupported, convert
from opalg.problems import tridiagonal

FORMATS = ["csr", "coo", "dense"]


@pytest.mark.parametrize("fmt", FORMATS)
def test_spmv_tridiagonal_known_result(ref, fmt):
    a = opalg.matrix_from_data(ref, tridiagonal(3), fmt)
    b = Dense.vector(ref, [1.0, 2.0, 3.0])
    x = Dense.zeros(ref, 3, 1)
    a.apply(b, x)
    # row 3: -1*2 + 2*3 = 4
    np.testing.assert_array_equal(x.data[:, 0], [0.0, 0.0, 4.0])


@pytest.mark.parametrize("fmt", ["csr", "coo"])
def test_spmv_empty_matrix(ref, fmt):
    data = MatrixData(Dim2(4, 4))
    a = opalg.matrix_from_data(ref, data, fmt)
    b = Dense.vector(ref, np.ones(4))
    x = Dense(ref, np.full((4, 1), 7.0))
    a.apply(b, x)
    np.testing.assert_array_equal(x.data, np.zeros((4, 1)))


@pytest.mark.parametrize("fmt", FORMATS)
def test_spmv_one_by_one(ref, fmt):
    data = MatrixData(Dim2(1, 1), [0], [0], [2.5])
    a = opalg.matrix_from_data(ref, data, fmt)
    b = Dense.vector(ref, [3.0])
    x = Dense.zeros(ref, 1, 1)
    a.apply(b, x)
    assert x.data[0, 0] == 7.5


def test_stencil_apply_known_values(ref):
    s = StencilMatrix(ref, 3, -1.0, 2.0, -1.0)
    b = Dense.vector(ref, [1.0, 1.0, 1.0])
    x = Dense.zeros(ref, 3, 1)
    s.apply(b, x)
    np.testing.assert_array_equal(x.data[:, 0], [1.0, 0.0, 1.0])


def test_stencil_identity_coefficients(ref):
    s = StencilMatrix(ref, 5, 0.0, 1.0, 0.0)
    v = np.arange(5.0)
    x = Dense.zeros(ref, 5, 1)
    s.apply(Dense.vector(ref, v), x)
    np.testing.assert_array_equal(x.data[:, 0], v)


def test_stencil_matches_assembled_csr(ref):
    n = 64
    s = StencilMatrix(ref, n, -1.0, 2.0, -1.0)
    c = convert(s, Csr)
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    xs = Dense.zeros(ref, n, 1)
    xc = Dense.zeros(ref, n, 1)
    s.apply(Dense.vector(ref, v), xs)
    c.apply(Dense.vector(ref, v), xc)
    scale = np.abs(xc.data).max()
    assert np.abs(xs.data - xc.data).max() <= 1e-14 * scale


def test_stencil_to_csr_row_ptrs(ref):
    s = StencilMatrix(ref, 3, -1.0, 2.0, -1.0)
    c = convert(s, Csr)
    np.testing.assert_array_equal(c.row_ptrs, [0, 2, 5, 7])


def test_stencil_only_converts_to_csr(ref):
    s = StencilMatrix(ref, 3, -1.0, 2.0, -1.0)
    with pytest.raises(Unsupported):
        convert(s, Coo)


def test_conversion_round_trip_identity(ref):
    data = tridiagonal(6, -1.5, 4.0, -0.5).canonicalize()
    coo = Coo.from_data(ref, data)
    back = convert(convert(coo, Csr), Coo)
    np.testing.assert_array_equal(back.row_idxs, coo.row_idxs)
    np.testing.assert_array_equal(back.col_idxs, coo.col_idxs)
    np.testing.assert_array_equal(back.vals, coo.vals)


def test_dense_zero_converts_to_empty_sparse(ref):
    d = Dense(ref, np.zeros((2, 2)))
    c = convert(d, Csr)
    assert c.nnz == 0


@pytest.mark.parametrize("src", FORMATS)
@pytest.mark.parametrize("dst", FORMATS)
def test_conversion_preserves_triples(ref, src, dst):
    from opalg.problems import random_sparse

    data = random_sparse(12, density=0.3, seed=5).canonicalize()
    a = opalg.matrix_from_data(ref, data, src)
    b = convert(a, dst)
    out = b.to_data().canonicalize()
    np.testing.assert_array_equal(out.rows, data.rows)
    np.testing.assert_array_equal(out.cols, data.cols)
    np.testing.assert_allclose(out.vals, data.vals, rtol=0, atol=0)


def test_matrix_data_canonicalize_sums_duplicates():
    data = MatrixData(Dim2(2, 2), [1, 0, 1, 1], [0, 0, 0, 1], [2.0, 1.0, 3.0, 4.0])
    canon = data.canonicalize()
    assert canon.nnz == 3
    np.testing.assert_array_equal(canon.rows, [0, 1, 1])
    np.testing.assert_array_equal(canon.cols, [0, 0, 1])
    np.testing.assert_array_equal(canon.vals, [1.0, 5.0, 4.0])


def test_dense_blas_properties(ref):
    rng = np.random.default_rng(11)
    x = Dense(ref, rng.standard_normal((50, 2)))
    y = Dense(ref, rng.standard_normal((50, 2)))

    # dot symmetry
    np.testing.assert_array_equal(x.dot(y), y.dot(x))

    # norm2(x)^2 == dot(x, x) within 4 ulps
    norms = x.norm2()
    dots = x.dot(x)
    for n2, d in zip(norms ** 2, dots):
        assert abs(n2 - d) <= 4 * np.spacing(d)

    # add_scaled round trip restores y
    y0 = y.data.copy()
    y.add_scaled(0.7, x)
    y.add_scaled(-0.7, x)
    scale = np.abs(y0).max()
    assert np.abs(y.data - y0).max() <= 1e-15 * scale


def test_dense_stride_view(ref):
    base = np.zeros((6, 5))
    base[:, :3] = np.arange(18.0).reshape(6, 3)
    d = Dense.wrap(ref, base[:, :3])
    assert d.stride == 5  # row stride of the parent allocation
    assert tuple(d.size) == (6, 3)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 24), density=st.floats(0.05, 0.5), seed=st.integers(0, 1000))
def test_format_equivalence_property(n, density, seed):
    from opalg.problems import random_sparse

    ref = opalg.ReferenceExecutor()
    data = random_sparse(n, density=density, seed=seed, diag_dominant=False)
    dense = data.to_dense_array()
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    oracle = dense @ v
    scale = max(np.abs(oracle).max(), 1e-300)
    for fmt in FORMATS:
        a = opalg.matrix_from_data(ref, data, fmt)
        x = Dense.zeros(ref, n, 1)
        a.apply(Dense.vector(ref, v), x)
        assert np.abs(x.data[:, 0] - oracle).max() <= 1e-13 * scale
