"""Exception hierarchy shared by all modules."""


class RoughDiskError(Exception):
    """Base class for domain errors (CLI exit status 1)."""


class BounceLimitExceeded(RoughDiskError):
    pass


class DegenerateHit(RoughDiskError):
    pass


class TooManyDiscards(RoughDiskError):
    pass


class InvalidShape(RoughDiskError, ValueError):
    pass


class InvalidMeasure(RoughDiskError, ValueError):
    pass


class QuadratureNonConvergent(RoughDiskError):
    pass


class DomainError(RoughDiskError, ValueError):
    pass


class DivisionByZero(RoughDiskError, ZeroDivisionError):
    pass


class NumericalFailure(RoughDiskError):
    pass


class EmptyIntersection(RoughDiskError):
    pass


class InfeasibleLevel(RoughDiskError):
    pass


class TableRangeExceeded(RoughDiskError):
    pass


class StepUnderflow(RoughDiskError):
    pass


class InconclusiveClassification(RoughDiskError):
    pass
