"""Operator algebra core: LinOp, LinOpFactory, and composition.

Everything that maps vectors to vectors -- matrices, solvers, preconditioners,
matrix-free operators -- implements :class:`LinOp` and is applied through the
same two entry points:

* ``apply(b, x)``            computes ``x = L(b)``
* ``apply_advanced(a, b, c, x)`` computes ``x = a * L(b) + c * x``

Operators derived from a system matrix (solvers, preconditioners) are built by
a :class:`LinOpFactory` via ``generate(A)``; nested factories are generated
recursively against the same matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, Unsupported
from .executor import Executor
from .kernels import AddScaledKernel, CopyKernel, ScaleKernel
from .loggers import EventKind, Loggable
from .ownership import Owned, take_ownership


@dataclass(frozen=True)
class Dim2:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise DimensionMismatch("negative dimension")

    def __iter__(self):
        return iter((self.rows, self.cols))

    @property
    def square(self):
        return self.rows == self.cols


class LinOp(Loggable, Owned):
    """A sized linear operator bound to one executor.

    ``apply`` never mutates ``b``, the scalars, or the operator itself. If an
    argument lives on a different executor it is temporarily copied to this
    operator's executor; only the mutable output ``x`` is copied back.
    """

    def __init__(self, exc: Executor, size: Dim2):
        Loggable.__init__(self)
        self.exec = exc
        self.size = size if isinstance(size, Dim2) else Dim2(*size)

    # -- public entry points --------------------------------------------

    def apply(self, b, x):
        """x <- L(b). Repeatable: identical inputs give identical outputs."""
        self._check_usable()
        self._check_conformal(b, x)
        self._log(EventKind.LINOP_APPLY_STARTED,
                  {"op": type(self).__name__, "uid": self.uid})
        b_loc, x_loc = self._migrate_in(b, x)
        self._apply_impl(b_loc, x_loc)
        self._migrate_out(x, x_loc)
        self._log(EventKind.LINOP_APPLY_COMPLETED,
                  {"op": type(self).__name__, "uid": self.uid})

    def apply_advanced(self, alpha, b, beta, x):
        """x <- alpha * L(b) + beta * x, with 1x1 dense alpha/beta."""
        self._check_usable()
        self._check_conformal(b, x)
        self._log(EventKind.LINOP_APPLY_STARTED,
                  {"op": type(self).__name__, "uid": self.uid, "advanced": 1})
        b_loc, x_loc = self._migrate_in(b, x)
        self._apply_advanced_impl(alpha, b_loc, beta, x_loc)
        self._migrate_out(x, x_loc)
        self._log(EventKind.LINOP_APPLY_COMPLETED,
                  {"op": type(self).__name__, "uid": self.uid, "advanced": 1})

    # -- hooks for concrete operators ------------------------------------

    def _apply_impl(self, b, x):
        raise NotImplementedError

    def _apply_advanced_impl(self, alpha, b, beta, x):
        # Fallback synthesis for operators without a fused kernel:
        # tmp = L(b); x *= beta; x += alpha * tmp.
        tmp = x.clone()
        self._apply_impl(b, tmp)
        exc = self.exec
        exc.run(ScaleKernel(_scalar_value(beta), x.data))
        exc.run(AddScaledKernel(_scalar_value(alpha), tmp.data, x.data))

    # -- plumbing ---------------------------------------------------------

    #: apply operands must be dense; set by the Dense format class.
    is_dense = False

    def _check_conformal(self, b, x):
        if not (b.is_dense and x.is_dense):
            raise Unsupported("apply operands must be dense vectors/matrices "
                              "(sparse operands are not supported)")
        if b.size.rows != self.size.cols or x.size.rows != self.size.rows \
                or b.size.cols != x.size.cols:
            raise DimensionMismatch(
                f"apply: L is {tuple(self.size)}, b is {tuple(b.size)}, "
                f"x is {tuple(x.size)}")

    def _migrate_in(self, b, x):
        b_loc = b if b.exec is self.exec else b.clone_to(self.exec)
        x_loc = x if x.exec is self.exec else x.clone_to(self.exec)
        return b_loc, x_loc

    def _migrate_out(self, x, x_loc):
        if x_loc is not x:
            x.exec.run(CopyKernel(x_loc.data, x.data))

    def clone(self):
        return self.clone_to(self.exec)

    def clone_to(self, target: Executor) -> "LinOp":
        """Deep copy with identical apply behavior on ``target``."""
        raise NotImplementedError(f"{type(self).__name__} does not support clone")


def _scalar_value(s):
    """Extract the (1, m)-broadcastable value of a 1x1/1xm dense scalar."""
    if isinstance(s, (int, float)):
        return s
    return s.data[0:1, :]


class Identity(LinOp):
    """The identity operator; its apply is a plain copy."""

    def __init__(self, exc, n):
        super().__init__(exc, Dim2(n, n))

    def _apply_impl(self, b, x):
        self.exec.run(CopyKernel(b.data, x.data))

    def clone_to(self, target):
        return Identity(target, self.size.rows)


class LinOpFactory(Loggable, Owned):
    """Higher-order mapping from a system operator to a derived operator.

    ``generate`` is repeatable: equal inputs produce operators with identical
    observable behavior. Parameters are validated at generate time (nested
    factories cannot see the system matrix earlier).
    """

    def __init__(self, exc: Executor):
        Loggable.__init__(self)
        self.exec = exc

    def generate(self, system_matrix) -> LinOp:
        self._check_usable()
        a = take_ownership(system_matrix)
        self._log(EventKind.LINOP_FACTORY_GENERATE_STARTED,
                  {"factory": type(self).__name__})
        self._validate(a)
        op = self._generate(a)
        self._log(EventKind.LINOP_FACTORY_GENERATE_COMPLETED,
                  {"factory": type(self).__name__})
        return op

    def _validate(self, a):
        pass

    def _generate(self, a) -> LinOp:
        raise NotImplementedError


class Composition(LinOp):
    """Product of operators, applied right to left through temporaries."""

    def __init__(self, terms):
        terms = [take_ownership(t) for t in terms]
        if not terms:
            raise DimensionMismatch("composition of zero operators has no size")
        for left, right in zip(terms, terms[1:]):
            if left.size.cols != right.size.rows:
                raise DimensionMismatch(
                    f"composition: {tuple(left.size)} . {tuple(right.size)}")
        super().__init__(terms[0].exec,
                         Dim2(terms[0].size.rows, terms[-1].size.cols))
        self.terms = terms

    def _apply_impl(self, b, x):
        current = b
        for term in reversed(self.terms[1:]):
            nxt = b.like(term.size.rows, b.size.cols)
            term.apply(current, nxt)
            current = nxt
        self.terms[0].apply(current, x)

    def clone_to(self, target):
        return Composition([t.clone_to(target) for t in self.terms])


def compose(*ops) -> Composition:
    """Compose operators left to right: compose(A, B).apply(b) == A(B(b))."""
    return Composition(list(ops))


def clone_to(obj, target: Executor):
    """Deep copy of any operator (or vector) onto ``target``."""
    return obj.clone_to(target)


def as_dense(op):
    """Downcast helper: vectors passed to apply must be dense matrices."""
    from .formats import Dense

    if not isinstance(op, Dense):
        raise Unsupported(f"expected a dense vector/matrix, got {type(op).__name__}")
    return op
