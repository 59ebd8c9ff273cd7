import threading

import numpy as np
import pytest

import opalg
from opalg import (Array, ExecutorKind, InstrumentedExecutor, KernelNotImplemented,
                   Operation, ParallelExecutor, ReferenceExecutor, StorageMode,
                   Traffic, create_executor)
from opalg.kernels import AddScaledKernel, CopyKernel, DotKernel, Norm2Kernel


def test_create_executor_kinds():
    ref = create_executor("reference")
    assert ref.kind is ExecutorKind.REFERENCE
    assert ref.master is ref  # host executor is its own master

    par = create_executor("parallel", workers=3)
    assert par.kind is ExecutorKind.PARALLEL
    assert par.workers == 3
    assert par.master is par

    instr = create_executor("instrumented")
    assert instr.kind is ExecutorKind.INSTRUMENTED
    assert isinstance(instr.inner, ReferenceExecutor)
    snap = instr.counter.snapshot()
    assert (snap.bytes_read, snap.bytes_written) == (0, 0)


def test_instrumented_nesting_forbidden():
    inner = create_executor("instrumented")
    with pytest.raises(opalg.OpalgError):
        InstrumentedExecutor(inner)


def test_parallel_worker_default_positive():
    par = ParallelExecutor()
    assert par.workers >= 1
    with pytest.raises(opalg.OpalgError):
        ParallelExecutor(workers=0)


def test_array_copy_between_executors(ref, par):
    src = Array(par, data=[1, 2, 3, 4], dtype="int64")
    dst = src.copy_to(ref)
    assert dst.exec is ref
    assert dst.mode is StorageMode.OWNING
    np.testing.assert_array_equal(dst.data, [1, 2, 3, 4])
    np.testing.assert_array_equal(src.data, [1, 2, 3, 4])  # source unchanged


def test_array_copy_empty_and_same_executor(ref):
    empty = Array(ref, data=[], dtype="float64")
    out = empty.copy_to(ref)
    assert len(out) == 0

    a = Array(ref, data=[5.0, 6.0])
    b = a.copy_to(ref)
    b.data[0] = -1.0
    assert a.data[0] == 5.0  # deep copy: storage distinct


def test_array_view_aliases_caller_buffer(ref):
    buf = np.array([1.0, 2.0, 3.0, 4.0])
    view = Array.view(ref, 4, buf)
    assert view.mode is StorageMode.VIEW
    assert len(view) == 4
    np.testing.assert_array_equal(view.data, [1, 2, 3, 4])
    view.data[2] = 9.0
    assert buf[2] == 9.0  # mutations visible to the caller

    empty = Array.view(ref, 0, buf)
    assert len(empty) == 0

    del view
    np.testing.assert_array_equal(buf, [1.0, 2.0, 9.0, 4.0])  # buffer intact


def test_uninitialized_allocation_readable(ref):
    arr = Array(ref, size=16)
    _ = arr.data.sum()  # unspecified values, but never a crash
    assert len(arr) == 16


def test_run_dispatches_by_kind(ref, par):
    calls = []

    class Probe(Operation):
        name = "probe"

        def reference(self, exc):
            calls.append("reference")

        def parallel(self, exc):
            calls.append("parallel")

    ref.run(Probe())
    par.run(Probe())
    assert calls == ["reference", "parallel"]


def test_missing_kernel_variant_raises(par):
    class RefOnly(Operation):
        name = "ref_only"

        def reference(self, exc):
            pass

    with pytest.raises(KernelNotImplemented):
        par.run(RefOnly())


@pytest.mark.parametrize("n", [1, 7, 1000, 10007])
def test_parallel_matches_reference_elementwise_exactly(ref, par, n):
    rng = np.random.default_rng(n)
    x = rng.standard_normal((n, 2))
    y = rng.standard_normal((n, 2))

    ref_y = y.copy()
    ref.run(AddScaledKernel(0.37, x, ref_y))
    par_y = y.copy()
    par.run(AddScaledKernel(0.37, x, par_y))
    assert np.array_equal(ref_y, par_y)  # 0 ulps

    ref_c = np.empty_like(x)
    par_c = np.empty_like(x)
    ref.run(CopyKernel(x, ref_c))
    par.run(CopyKernel(x, par_c))
    assert np.array_equal(ref_c, par_c)


@pytest.mark.parametrize("n", [1, 13, 10007, 100003])
def test_parallel_reductions_within_tolerance(ref, par, n):
    rng = np.random.default_rng(n)
    x = rng.standard_normal((n, 1))
    y = rng.standard_normal((n, 1))
    out_ref = np.zeros((1, 1))
    out_par = np.zeros((1, 1))
    ref.run(DotKernel(x, y, out_ref))
    par.run(DotKernel(x, y, out_par))
    assert abs(out_par[0, 0] - out_ref[0, 0]) <= 2.0 ** -40 * abs(out_ref[0, 0])

    ref.run(Norm2Kernel(x, out_ref))
    par.run(Norm2Kernel(x, out_par))
    assert abs(out_par[0, 0] - out_ref[0, 0]) <= 2.0 ** -40 * abs(out_ref[0, 0])


def test_instrumented_results_bit_identical(ref, instr):
    rng = np.random.default_rng(3)
    x = rng.standard_normal((257, 1))
    y = rng.standard_normal((257, 1))

    y_ref = y.copy()
    ref.run(AddScaledKernel(2.5, x, y_ref))
    y_in = y.copy()
    instr.run(AddScaledKernel(2.5, x, y_in))
    assert np.array_equal(y_ref, y_in)


def test_traffic_counting_and_additivity(instr):
    n = 100
    x = np.ones((n, 1))
    y = np.ones((n, 1))
    out = np.zeros((1, 1))

    instr.reset_counters()
    instr.run(CopyKernel(x, y))
    copy_snap = instr.counter.snapshot()
    assert copy_snap.bytes_read == n * 8
    assert copy_snap.bytes_written == n * 8

    instr.reset_counters()
    instr.run(DotKernel(x, y, out))
    dot_snap = instr.counter.snapshot()
    assert dot_snap.bytes_read == 2 * n * 8
    assert dot_snap.bytes_written == 8

    # additivity: A;B from reset equals sum of separate runs
    instr.reset_counters()
    instr.run(CopyKernel(x, y))
    instr.run(DotKernel(x, y, out))
    both = instr.counter.snapshot()
    assert both.bytes_read == copy_snap.bytes_read + dot_snap.bytes_read
    assert both.bytes_written == copy_snap.bytes_written + dot_snap.bytes_written


def test_copy_counted_on_instrumented_side_only(ref, instr):
    a = Array(ref, data=np.ones(64))
    instr.reset_counters()
    a.copy_to(instr)
    snap = instr.counter.snapshot()
    assert snap.bytes_read == 64 * 8
    assert snap.bytes_written == 64 * 8

    b = Array(instr, data=np.ones(32))
    instr.reset_counters()
    b.copy_to(ref)
    snap = instr.counter.snapshot()
    # charged once per byte moved on the instrumented side it owns
    assert (snap.bytes_read, snap.bytes_written) == (32 * 8, 32 * 8)


def test_counter_updates_atomic(instr):
    x = np.ones((1000, 1))
    y = np.empty_like(x)
    instr.reset_counters()

    def worker():
        for _ in range(50):
            instr.run(CopyKernel(x, y))

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    snap = instr.counter.snapshot()
    assert snap.bytes_read == 8 * 50 * 1000 * 8
    assert snap.bytes_written == 8 * 50 * 1000 * 8
