"""Exception types shared across the library."""


class OpalgError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(OpalgError):
    """Operator/vector dimensions do not conform."""

    @classmethod
    def check(cls, cond, what=""):
        if not cond:
            raise cls(what or "dimension mismatch")


class KernelNotImplemented(OpalgError):
    """The operation has no kernel for the requested executor."""


class Unsupported(OpalgError):
    """Requested feature/combination is outside the supported set."""


class ParseError(OpalgError):
    """Malformed input file. Carries the 1-based line number."""

    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class Singular(OpalgError):
    """A matrix/block that must be invertible is numerically singular."""


class ContractViolation(OpalgError):
    """An API contract was violated (e.g. use after ownership transfer)."""


class NotReady(OpalgError):
    """Queried state that has not been produced yet."""


class ParameterError(OpalgError, ValueError):
    """A factory/criterion parameter is outside its valid range."""
