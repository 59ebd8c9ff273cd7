import numpy as np
import pytest

import opalg
from opalg import (Composition, Csr, Dense, DimensionMismatch, Identity,
                   Unsupported, clone, compose, give, lend, share)
from opalg.problems import random_spd, tridiagonal

from conftest import make_system


def test_identity_apply(ref):
    ident = Identity(ref, 3)
    b = Dense.vector(ref, [1.0, 2.0, 3.0])
    x = Dense.zeros(ref, 3, 1)
    ident.apply(b, x)
    np.testing.assert_array_equal(x.data[:, 0], [1, 2, 3])


def test_csr_apply_known_values(ref):
    a = Csr.from_data(ref, tridiagonal(3))  # [[2,-1,0],[-1,2,-1],[0,-1,2]]
    b = Dense.vector(ref, [1.0, 1.0, 1.0])
    x = Dense.zeros(ref, 3, 1)
    a.apply(b, x)
    np.testing.assert_allclose(x.data[:, 0], [1.0, 0.0, 1.0], atol=0)
    # dense mat-vec oracle
    oracle = tridiagonal(3).to_dense_array() @ np.ones(3)
    np.testing.assert_array_equal(x.data[:, 0], oracle)


def test_multicolumn_apply_is_columnwise(ref):
    data = tridiagonal(5, -1.0, 3.0, -2.0)
    a = Csr.from_data(ref, data)
    rng = np.random.default_rng(0)
    cols = rng.standard_normal((5, 2))
    b = Dense(ref, cols)
    x = Dense.zeros(ref, 5, 2)
    a.apply(b, x)
    for j in range(2):
        bj = Dense.vector(ref, cols[:, j])
        xj = Dense.zeros(ref, 5, 1)
        a.apply(bj, xj)
        np.testing.assert_array_equal(x.data[:, j], xj.data[:, 0])


def test_apply_dimension_checks(ref):
    a = Csr.from_data(ref, tridiagonal(4))
    with pytest.raises(DimensionMismatch):
        a.apply(Dense.zeros(ref, 3, 1), Dense.zeros(ref, 4, 1))
    with pytest.raises(DimensionMismatch):
        a.apply(Dense.zeros(ref, 4, 1), Dense.zeros(ref, 5, 1))
    with pytest.raises(DimensionMismatch):
        a.apply(Dense.zeros(ref, 4, 2), Dense.zeros(ref, 4, 1))


def test_sparse_operands_rejected(ref):
    a = Csr.from_data(ref, tridiagonal(3))
    other = Csr.from_data(ref, tridiagonal(3))
    with pytest.raises(Unsupported):
        a.apply(other, Dense.zeros(ref, 3, 1))


def test_advanced_apply_identities(ref):
    a = Csr.from_data(ref, tridiagonal(6, -1, 4, -1))
    rng = np.random.default_rng(1)
    b = Dense(ref, rng.standard_normal((6, 1)))
    x0 = rng.standard_normal((6, 1))

    # alpha=1, beta=0 is a plain apply
    x1 = Dense(ref, x0.copy())
    a.apply_advanced(1.0, b, 0.0, x1)
    x2 = Dense.zeros(ref, 6, 1)
    a.apply(b, x2)
    np.testing.assert_allclose(x1.data, x2.data, rtol=0, atol=1e-15)

    # alpha=0, beta=1 leaves x unchanged
    x3 = Dense(ref, x0.copy())
    a.apply_advanced(0.0, b, 1.0, x3)
    np.testing.assert_array_equal(x3.data, x0)

    # alpha=2, beta=-1 on the identity with b == x gives x back
    ident = Identity(ref, 6)
    x4 = Dense(ref, x0.copy())
    b4 = Dense(ref, x0.copy())
    ident.apply_advanced(2.0, b4, -1.0, x4)
    np.testing.assert_allclose(x4.data, x0, rtol=1e-15)


def test_advanced_apply_with_dense_scalars(ref):
    a = Csr.from_data(ref, tridiagonal(4))
    b = Dense.vector(ref, [1.0, 0.0, 0.0, 1.0])
    x = Dense.vector(ref, [1.0, 1.0, 1.0, 1.0])
    alpha = Dense(ref, [[2.0]])
    beta = Dense(ref, [[-1.0]])
    a.apply_advanced(alpha, b, beta, x)
    oracle = 2.0 * (tridiagonal(4).to_dense_array() @ [1, 0, 0, 1]) - 1.0
    np.testing.assert_allclose(x.data[:, 0], oracle, rtol=1e-15)


def test_generate_solver_solves(ref):
    data = random_spd(20, seed=2)
    a, b, x = make_system(ref, data, seed=2)
    factory = opalg.Cg(ref, criteria=[opalg.Iteration(500),
                                      opalg.ResidualNormReduction(1e-12)])
    solver = factory.generate(a)
    solver.apply(b, x)
    oracle = np.linalg.solve(data.to_dense_array(), b.data[:, 0])
    np.testing.assert_allclose(x.data[:, 0], oracle, rtol=1e-8, atol=1e-10)


def test_nested_factory_generates_from_same_matrix(ref):
    data = random_spd(12, seed=3)
    a, b, x = make_system(ref, data, seed=3)
    factory = opalg.Cg(ref, criteria=[opalg.Iteration(100)],
                       preconditioner=opalg.Jacobi(ref))
    solver = factory.generate(a)
    # the held preconditioner acts exactly like one generated directly from A
    standalone = opalg.Jacobi(ref).generate(a)
    r = Dense.vector(ref, np.arange(1.0, 13.0))
    z1 = Dense.zeros(ref, 12, 1)
    z2 = Dense.zeros(ref, 12, 1)
    solver.precond.apply(r, z1)
    standalone.apply(r, z2)
    np.testing.assert_array_equal(z1.data, z2.data)


def test_generate_rejects_non_square(ref):
    data = opalg.MatrixData(opalg.Dim2(3, 4), [0], [0], [1.0])
    a = Csr.from_data(ref, data)
    factory = opalg.Cg(ref, criteria=[opalg.Iteration(5)])
    with pytest.raises(DimensionMismatch):
        factory.generate(a)


def test_factory_generate_repeatable(ref):
    data = random_spd(10, seed=4)
    factory = opalg.Cg(ref, criteria=[opalg.Iteration(30)])
    a1, b1, x1 = make_system(ref, data, seed=4)
    a2, b2, x2 = make_system(ref, data, seed=4)
    factory.generate(a1).apply(b1, x1)
    factory.generate(a2).apply(b2, x2)
    assert np.array_equal(x1.data, x2.data)


def test_compose_identity_is_noop(ref):
    a = Csr.from_data(ref, tridiagonal(5))
    comp = compose(Identity(ref, 5), a)
    b = Dense.vector(ref, np.arange(5.0))
    x1 = Dense.zeros(ref, 5, 1)
    x2 = Dense.zeros(ref, 5, 1)
    comp.apply(b, x1)
    a.apply(b, x2)
    np.testing.assert_array_equal(x1.data, x2.data)


def test_compose_matches_dense_product(ref):
    rng = np.random.default_rng(5)
    a_arr = rng.standard_normal((3, 3))
    b_arr = rng.standard_normal((3, 3))
    a = Dense(ref, a_arr)
    b = Dense(ref, b_arr)
    comp = compose(a, b)
    assert tuple(comp.size) == (3, 3)
    v = rng.standard_normal(3)
    vb = Dense.vector(ref, v)
    out = Dense.zeros(ref, 3, 1)
    comp.apply(vb, out)
    np.testing.assert_allclose(out.data[:, 0], a_arr @ (b_arr @ v), rtol=1e-13)


def test_compose_empty_and_nonconformal(ref):
    with pytest.raises(DimensionMismatch):
        Composition([])
    a = Dense(ref, np.ones((2, 3)))
    b = Dense(ref, np.ones((2, 3)))
    with pytest.raises(DimensionMismatch):
        compose(a, b)


def test_clone_to_preserves_behavior(ref, par):
    data = tridiagonal(40, -1.0, 2.5, -0.5)
    a = Csr.from_data(ref, data)
    a2 = opalg.clone_to(a, par)
    assert tuple(a2.size) == tuple(a.size)
    rng = np.random.default_rng(6)
    v = rng.standard_normal(40)
    x1 = Dense.zeros(ref, 40, 1)
    x2 = Dense.zeros(par, 40, 1)
    a.apply(Dense.vector(ref, v), x1)
    a2.apply(Dense.vector(par, v), x2)
    np.testing.assert_array_equal(x1.data, x2.data)


def test_clone_solver_rebinds_matrix(ref, par):
    data = random_spd(15, seed=7)
    a, b, x = make_system(ref, data, seed=7)
    factory = opalg.Cg(ref, criteria=[opalg.Iteration(200),
                                      opalg.ResidualNormReduction(1e-10)])
    solver = factory.generate(a)
    cloned = solver.clone_to(par)
    assert cloned.a is not solver.a
    b2 = Dense.vector(par, b.data[:, 0])
    x2 = Dense.zeros(par, 15, 1)
    solver.apply(b, x)
    cloned.apply(b2, x2)
    np.testing.assert_allclose(x2.data, x.data, rtol=1e-10)


def test_apply_repeatable_bitwise(ref):
    data = random_spd(25, seed=8)
    a, b, x = make_system(ref, data, seed=8)
    factory = opalg.Gmres(ref, criteria=[opalg.Iteration(40)], krylov_dim=10)
    solver = factory.generate(a)
    solver.apply(b, x)
    first = x.data.copy()
    x.fill(0.0)
    solver.apply(b, x)
    assert np.array_equal(x.data, first)


def test_executor_transparency(ref, par, instr):
    data = random_spd(30, seed=9)
    rng = np.random.default_rng(9)
    v = rng.standard_normal(30)
    results = {}
    for name, exc in [("ref", ref), ("par", par), ("instr", instr)]:
        a = Csr.from_data(exc, data)
        x = Dense.zeros(exc, 30, 1)
        a.apply(Dense.vector(exc, v), x)
        results[name] = x.data.copy()
    # instrumented(reference) is exact; parallel within 2^-40 relative
    assert np.array_equal(results["ref"], results["instr"])
    scale = np.abs(results["ref"]).max()
    assert np.abs(results["par"] - results["ref"]).max() <= 2.0 ** -40 * scale


def test_auto_migration_copies_back_output(ref, par):
    a = Csr.from_data(ref, tridiagonal(8))
    b = Dense.vector(par, np.ones(8))
    x = Dense.zeros(par, 8, 1)
    a.apply(b, x)  # operands migrate to ref, result copied back to par
    oracle = tridiagonal(8).to_dense_array() @ np.ones(8)
    np.testing.assert_array_equal(x.data[:, 0], oracle)
    assert x.exec is par
    np.testing.assert_array_equal(b.data[:, 0], np.ones(8))


def test_give_then_use_detected(ref):
    a = Csr.from_data(ref, tridiagonal(4, -1, 4, -1))
    factory = opalg.Cg(ref, criteria=[opalg.Iteration(3)])
    solver = factory.generate(give(a))
    with pytest.raises(opalg.ContractViolation):
        a.apply(Dense.zeros(ref, 4, 1), Dense.zeros(ref, 4, 1))
    # the transferred guts keep working inside the solver
    b = Dense.vector(ref, np.ones(4))
    x = Dense.zeros(ref, 4, 1)
    solver.apply(b, x)
    assert solver.last_status.iterations == 3


def test_share_and_lend_leave_source_usable(ref):
    a = Csr.from_data(ref, tridiagonal(4, -1, 4, -1))
    factory = opalg.Cg(ref, criteria=[opalg.Iteration(2)])
    factory.generate(share(a))
    b = Dense.vector(ref, np.ones(4))
    x = Dense.zeros(ref, 4, 1)
    lend(a).apply(b, x)  # still usable


def test_clone_pass_mode_leaves_source_independent(ref):
    a = Csr.from_data(ref, tridiagonal(4, -1, 4, -1))
    factory = opalg.Cg(ref, criteria=[opalg.Iteration(2)])
    solver = factory.generate(clone(a))
    assert solver.a is not a
    a.vals[:] = 0.0  # mutating the source must not affect the solver's copy
    assert solver.a.vals.max() == 4.0
