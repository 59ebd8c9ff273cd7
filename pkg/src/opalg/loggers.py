"""Observer-style event logging.

Any loggable object (executors, operators, factories, criteria) accepts
multiple attached loggers, each with its own event mask. Unmasked events are
dropped before any payload work happens, so an unattached or fully masked
object pays a single truthiness check per event. Logging never perturbs
numerical results.
"""

from __future__ import annotations

import itertools
import time
from collections import deque
from enum import Enum

from .errors import NotReady


class EventKind(Enum):
    ALLOCATION_COMPLETED = "allocation_completed"
    COPY_COMPLETED = "copy_completed"
    OPERATION_LAUNCHED = "operation_launched"
    OPERATION_COMPLETED = "operation_completed"
    LINOP_APPLY_STARTED = "linop_apply_started"
    LINOP_APPLY_COMPLETED = "linop_apply_completed"
    LINOP_FACTORY_GENERATE_STARTED = "linop_factory_generate_started"
    LINOP_FACTORY_GENERATE_COMPLETED = "linop_factory_generate_completed"
    CRITERION_CHECK_COMPLETED = "criterion_check_completed"
    ITERATION_COMPLETE = "iteration_complete"


#: Mask selecting every event kind.
ALL_EVENTS = frozenset(EventKind)

_uid_counter = itertools.count(1)


class Loggable:
    """Mixin giving an object an id, logger attachment, and event emission."""

    def __init__(self):
        self.uid = next(_uid_counter)
        self._log_channels = []

    def attach(self, logger: "Logger", mask=ALL_EVENTS):
        """Deliver masked events from this object to ``logger``.

        Multiple loggers receive events in attachment order.
        """
        self._log_channels.append((logger, frozenset(mask)))

    def detach(self, logger: "Logger"):
        self._log_channels = [(lg, m) for lg, m in self._log_channels
                              if lg is not logger]

    def _log(self, kind: EventKind, payload: dict):
        channels = self._log_channels
        if not channels:
            return
        ts = time.monotonic_ns()
        for logger, mask in channels:
            if kind in mask:
                logger.on_event(ts, kind, self.uid, payload)


class Logger:
    def on_event(self, ts, kind, uid, payload):
        raise NotImplementedError


class StreamLogger(Logger):
    """Writes one line per event: ``<timestamp_ns> <event> <object-id> <payload>``.

    Field order is stable so output files can be diffed.
    """

    def __init__(self, sink):
        self.sink = sink

    def on_event(self, ts, kind, uid, payload):
        fields = " ".join(f"{k}={payload[k]}" for k in payload)
        self.sink.write(f"{ts} {kind.value} {uid} {fields}\n")


class RecordLogger(Logger):
    """Keeps a bounded in-memory history of received events."""

    DEFAULT_CAPACITY = 4096

    def __init__(self, capacity=DEFAULT_CAPACITY):
        self.history = deque(maxlen=capacity)

    def on_event(self, ts, kind, uid, payload):
        self.history.append((ts, kind, uid, dict(payload)))

    def query(self, kind: EventKind):
        """All stored events of one kind, in chronological order."""
        return [entry for entry in self.history if entry[1] is kind]


class ConvergenceLogger(Logger):
    """Captures the iteration count and final relative residual norm of a solve.

    The norm is taken from the criterion's own check events, so it matches the
    criterion's final state exactly. Solves driven purely by iteration/time
    criteria have no residual information; ``relative_residual_norm`` is then
    None.
    """

    def __init__(self):
        self._iterations = None
        self._rel_norm = None

    def on_event(self, ts, kind, uid, payload):
        if kind is EventKind.ITERATION_COMPLETE:
            self._iterations = payload.get("iteration")
        elif kind is EventKind.CRITERION_CHECK_COMPLETED:
            rel = payload.get("relative_norms")
            if rel is not None:
                self._rel_norm = max(rel)

    def result(self):
        """(iterations, final_relative_residual_norm) of the completed solve."""
        if self._iterations is None:
            raise NotReady("no solve has completed through this logger")
        return self._iterations, self._rel_norm
