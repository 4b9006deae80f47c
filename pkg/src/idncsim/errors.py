class IdncError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(IdncError, ValueError):
    """Invalid input data: malformed matrices, bad config files, infeasible targets."""


class InstanceTooLarge(IdncError):
    """A size guard (vertex cap, action count, reachable states) was exceeded."""


class ConflictViolation(IdncError):
    """A scheduler produced a decision that is not conflict-free."""

    def __init__(self, report):
        super().__init__(str(report))
        self.report = report


class UnreachableDevice(IdncError):
    """A device has no direct neighbour, so it can never be served."""


class InvariantViolation(IdncError, AssertionError):
    """An always-on runtime invariant failed (not stripped by ``python -O``)."""


def check(cond: bool, message: str) -> None:
    if not cond:
        raise InvariantViolation(message)
