"""Exception hierarchy shared by every module."""


class SplitMetricError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SplitMetricError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class DivergentMomentError(DomainError):
    """A requested negative moment does not exist for the given parameters."""


class DataError(DomainError):
    """A dataset file could not be parsed into a numeric table."""


class NumericalError(SplitMetricError, ArithmeticError):
    """An internal numerical procedure failed (e.g. no root was bracketed)."""
