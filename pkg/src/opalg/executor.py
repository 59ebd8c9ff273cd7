"""Executors: memory arenas plus kernel dispatch.

Every data object lives on exactly one executor and every kernel launch is routed
through :meth:`Executor.run`. Three kinds are provided:

* ``ReferenceExecutor`` -- sequential, deterministic kernels (the correctness
  baseline; results are bit-reproducible across runs).
* ``ParallelExecutor`` -- multi-worker CPU execution over contiguous row blocks;
  reductions accumulate per-worker partials and combine them sequentially so
  results are deterministic for a fixed worker count.
* ``InstrumentedExecutor`` -- wraps one of the above, delegates all execution to
  it unchanged, and accumulates the declared memory traffic of every launched
  kernel into a byte counter.

All arenas share the host address space; distinctness between executors is
logical (copies between executors are real copies).
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor as _Pool
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import config
from .errors import KernelNotImplemented, OpalgError
from .loggers import EventKind, Loggable


class ExecutorKind(Enum):
    REFERENCE = "reference"
    PARALLEL = "parallel"
    INSTRUMENTED = "instrumented"


@dataclass(frozen=True)
class Traffic:
    """Byte volume moved by one kernel launch (as declared by the kernel)."""

    bytes_read: int = 0
    bytes_written: int = 0

    def __add__(self, other):
        return Traffic(self.bytes_read + other.bytes_read,
                       self.bytes_written + other.bytes_written)


class TrafficCounter:
    """Monotonic read/write byte counter. Updates are atomic."""

    def __init__(self):
        self._lock = threading.Lock()
        self.bytes_read = 0
        self.bytes_written = 0

    def add(self, traffic: Traffic):
        with self._lock:
            self.bytes_read += traffic.bytes_read
            self.bytes_written += traffic.bytes_written

    def reset(self):
        with self._lock:
            self.bytes_read = 0
            self.bytes_written = 0

    def snapshot(self) -> Traffic:
        with self._lock:
            return Traffic(self.bytes_read, self.bytes_written)


class Operation:
    """A kernel with one implementation per executor kind.

    ``run`` dispatches to :meth:`reference` or :meth:`parallel`; a missing
    variant raises :class:`KernelNotImplemented`. :meth:`traffic` declares the
    kernel's modeled memory footprint, which only instrumented executors
    consume.
    """

    name = "operation"

    def reference(self, exc):
        raise KernelNotImplemented(f"{self.name}: no reference kernel")

    def parallel(self, exc):
        raise KernelNotImplemented(f"{self.name}: no parallel kernel")

    def traffic(self) -> Traffic:
        return Traffic()


class Executor(Loggable):
    """Names a memory arena and an execution policy.

    Executors are immutable after creation and safe to share across threads.
    ``master`` is always a host-side executor (itself for host kinds).
    """

    kind: ExecutorKind

    def __init__(self):
        super().__init__()

    @property
    def master(self) -> "Executor":
        return self

    # -- allocation ----------------------------------------------------

    def alloc(self, shape, dtype) -> np.ndarray:
        """Uninitialized storage on this arena. Reads before the first write
        yield unspecified values."""
        buf = np.empty(shape, dtype=dtype)
        self._log(EventKind.ALLOCATION_COMPLETED,
                  {"executor": self.uid, "bytes": buf.nbytes})
        return buf

    # -- dispatch ------------------------------------------------------

    def run(self, op: Operation):
        """Execute ``op`` synchronously with the variant matching this kind."""
        self._log(EventKind.OPERATION_LAUNCHED, {"op": op.name})
        self._dispatch(op)
        self._log(EventKind.OPERATION_COMPLETED, {"op": op.name})

    def _dispatch(self, op: Operation):
        raise NotImplementedError

    # -- block helpers for kernel authors -------------------------------
    #
    # Kernels express their math against these two primitives so one body
    # serves both the sequential and the blocked variant.

    def map_blocks(self, n, fn):
        """Apply ``fn(lo, hi)`` over a partition of ``range(n)``."""
        raise NotImplementedError

    def sum_blocks(self, n, fn):
        """Reduce ``fn(lo, hi)`` partials over a partition of ``range(n)``.

        Partials are combined sequentially in block order, so the result is
        deterministic for a fixed partition.
        """
        raise NotImplementedError


class ReferenceExecutor(Executor):
    kind = ExecutorKind.REFERENCE

    def _dispatch(self, op):
        op.reference(self)

    def map_blocks(self, n, fn):
        fn(0, n)

    def sum_blocks(self, n, fn):
        return fn(0, n)

    def __repr__(self):
        return "ReferenceExecutor()"


class ParallelExecutor(Executor):
    """Contiguous row-block decomposition over a thread pool."""

    kind = ExecutorKind.PARALLEL

    def __init__(self, workers=None):
        super().__init__()
        self.workers = config.DEFAULT_WORKERS if workers is None else int(workers)
        if self.workers < 1:
            raise OpalgError("worker count must be >= 1")
        self._pool = None
        self._pool_lock = threading.Lock()

    def _get_pool(self):
        if self._pool is None:
            with self._pool_lock:
                if self._pool is None:
                    self._pool = _Pool(max_workers=self.workers)
        return self._pool

    def partition(self, n):
        w = min(self.workers, max(n, 1))
        bounds = np.linspace(0, n, w + 1).astype(int)
        return [(int(bounds[i]), int(bounds[i + 1])) for i in range(w)
                if bounds[i] < bounds[i + 1]] or [(0, n)]

    def _dispatch(self, op):
        op.parallel(self)

    def map_blocks(self, n, fn):
        blocks = self.partition(n)
        if len(blocks) == 1:
            fn(*blocks[0])
            return
        pool = self._get_pool()
        list(pool.map(lambda b: fn(*b), blocks))

    def sum_blocks(self, n, fn):
        blocks = self.partition(n)
        if len(blocks) == 1:
            return fn(*blocks[0])
        pool = self._get_pool()
        partials = list(pool.map(lambda b: fn(*b), blocks))
        acc = partials[0]
        for p in partials[1:]:  # sequential combine keeps the sum deterministic
            acc = acc + p
        return acc

    def __repr__(self):
        return f"ParallelExecutor(workers={self.workers})"


class InstrumentedExecutor(Executor):
    """Counts the declared traffic of every kernel run through it.

    Wraps exactly one non-instrumented executor and delegates execution to it,
    so numerical results are bit-identical to the inner executor's.
    """

    kind = ExecutorKind.INSTRUMENTED

    def __init__(self, inner: Executor):
        super().__init__()
        if isinstance(inner, InstrumentedExecutor):
            raise OpalgError("instrumented executors cannot be nested")
        if not isinstance(inner, Executor):
            raise OpalgError("inner must be an executor")
        self.inner = inner
        self.counter = TrafficCounter()

    def _dispatch(self, op):
        self.inner._dispatch(op)
        self.counter.add(op.traffic())

    def map_blocks(self, n, fn):
        self.inner.map_blocks(n, fn)

    def sum_blocks(self, n, fn):
        return self.inner.sum_blocks(n, fn)

    def reset_counters(self):
        self.counter.reset()

    def __repr__(self):
        return f"InstrumentedExecutor({self.inner!r})"


def create_executor(kind, workers=None, inner=None) -> Executor:
    """Build an executor from an :class:`ExecutorKind` or its string name.

    ``instrumented`` wraps ``inner`` (a fresh ReferenceExecutor by default).
    """
    if isinstance(kind, str):
        kind = ExecutorKind(kind)
    if kind is ExecutorKind.REFERENCE:
        return ReferenceExecutor()
    if kind is ExecutorKind.PARALLEL:
        return ParallelExecutor(workers=workers)
    if kind is ExecutorKind.INSTRUMENTED:
        return InstrumentedExecutor(inner if inner is not None
                                    else ReferenceExecutor())
    raise OpalgError(f"unknown executor kind: {kind}")


class StorageMode(Enum):
    OWNING = "owning"
    VIEW = "view"


class Array:
    """Fixed-size buffer resident on one executor.

    Owning arrays hold their own storage; views alias caller-provided memory
    and never release it. Element access is defined through the owning
    executor's kernels (exposed here as the raw ``data`` ndarray for kernel
    authors).
    """

    def __init__(self, exc: Executor, size=None, data=None, mode=StorageMode.OWNING,
                 dtype=None):
        self.exec = exc
        self.mode = mode
        if data is not None:
            arr = np.asarray(data, dtype=dtype)
            if mode is StorageMode.OWNING:
                arr = arr.copy()
                self._log_alloc(arr)
            self.data = arr
        else:
            self.data = exc.alloc(int(size), dtype or config.DEFAULT_VALUE_DTYPE)

    def _log_alloc(self, arr):
        self.exec._log(EventKind.ALLOCATION_COMPLETED,
                       {"executor": self.exec.uid, "bytes": arr.nbytes})

    @classmethod
    def view(cls, exc, size, buffer):
        """Non-owning view over ``buffer`` (valid for ``size`` elements for the
        view's lifetime; the caller keeps ownership)."""
        buf = np.asarray(buffer)
        if buf.ndim != 1:
            buf = buf.reshape(-1)
        if size > buf.size:
            raise OpalgError("view exceeds the underlying buffer")
        view = buf[:size]
        obj = cls.__new__(cls)
        obj.exec = exc
        obj.mode = StorageMode.VIEW
        obj.data = view
        return obj

    def __len__(self):
        return int(self.data.size)

    def copy_to(self, target: Executor) -> "Array":
        """Deep copy onto ``target`` (always owning; source unchanged).

        The transfer is charged to the instrumented side only, once per byte
        it owns.
        """
        out = Array(target, size=len(self), dtype=self.data.dtype)
        out.data[...] = self.data
        nbytes = self.data.nbytes
        for side in {self.exec, target}:
            if isinstance(side, InstrumentedExecutor):
                side.counter.add(Traffic(nbytes, nbytes))
            side._log(EventKind.COPY_COMPLETED,
                      {"from": self.exec.uid, "to": target.uid, "bytes": nbytes})
        return out
