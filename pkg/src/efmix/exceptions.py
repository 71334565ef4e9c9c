"""Exception types raised across the package."""


class EfmixError(Exception):
    """Base class for all package errors."""


class InstanceParseError(EfmixError, ValueError):
    """The instance or allocation document is malformed."""


class InstanceTooLargeError(EfmixError, ValueError):
    """A brute-force routine was asked to enumerate beyond its guard."""


class SearchBudgetExceeded(EfmixError, RuntimeError):
    """An exhaustive search would evaluate more candidates than allowed."""


class PositiveCycleError(EfmixError, ValueError):
    """The envy graph has a positive-weight cycle, so no subsidy makes it envy-free."""


class PreconditionError(EfmixError, ValueError):
    """An operation was called on input that violates its entry condition."""


class InvariantViolation(EfmixError, AssertionError):
    """A structural property that the construction guarantees did not hold."""
