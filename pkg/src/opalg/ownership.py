"""Ownership-passing decorators for API boundaries.

Arguments crossing an owning boundary (factories, solvers binding a system
matrix) are wrapped to state how they are passed:

* :func:`clone`  -- pass a deep copy (by value),
* :func:`share`  -- share ownership (by reference),
* :func:`give`   -- transfer ownership; the source is left in a valid but
  undefined state where any use other than destruction or reassignment is a
  contract violation,
* :func:`lend`   -- temporary access for the duration of one call.

Give-then-use is detected when ``config.debug_contracts`` is set.
"""

from __future__ import annotations

import copy
from enum import Enum

from . import config
from .errors import ContractViolation


class PassMode(Enum):
    CLONE = "clone"
    LEND = "lend"
    GIVE = "give"
    SHARE = "share"


class Owned:
    """Mixin adding move-invalidation support to polymorphic objects."""

    _moved = False

    def _check_usable(self):
        if config.debug_contracts and self._moved:
            raise ContractViolation(
                f"{type(self).__name__} was passed with give() and may only be "
                "destroyed or reassigned")

    def _steal(self):
        """Detach this object's guts into a fresh handle, invalidating self."""
        self._check_usable()
        replica = copy.copy(self)
        replica._moved = False
        self._moved = True
        return replica


class _Pass:
    __slots__ = ("obj", "mode")

    def __init__(self, obj, mode):
        self.obj = obj
        self.mode = mode


def give(obj: Owned) -> _Pass:
    obj._check_usable()
    return _Pass(obj, PassMode.GIVE)


def share(obj: Owned) -> _Pass:
    obj._check_usable()
    return _Pass(obj, PassMode.SHARE)


def clone(obj: Owned) -> _Pass:
    obj._check_usable()
    return _Pass(obj, PassMode.CLONE)


def lend(obj: Owned):
    """Borrow for one call. No ownership transfer; returns the object itself."""
    obj._check_usable()
    return obj


def take_ownership(arg):
    """Resolve a possibly-wrapped argument at an owning boundary.

    Plain objects behave like :func:`share`.
    """
    if not isinstance(arg, _Pass):
        if isinstance(arg, Owned):
            arg._check_usable()
        return arg
    obj, mode = arg.obj, arg.mode
    if mode is PassMode.GIVE:
        return obj._steal()
    if mode is PassMode.CLONE:
        return obj.clone()
    obj._check_usable()
    return obj
