"""Exception types raised by the analytical and simulation layers."""


class MprDelayError(Exception):
    """Base class for all package errors."""


class DomainError(MprDelayError, ValueError):
    """An argument lies outside the domain of the operation."""


class NoSolution(MprDelayError):
    """Offered load exceeds the maximum achievable throughput."""


class NoFixedPoint(MprDelayError):
    """The saturation fixed-point system has no root on the search interval."""


class SeriesDivergent(MprDelayError):
    """A transform series did not reach its tolerance within the term budget."""


class UnstableSystem(MprDelayError):
    """The queue is not stable (HOL occupancy at or above one)."""


class NoCrossing(MprDelayError):
    """The bounded-delay and saturation throughputs never cross on the r interval."""
