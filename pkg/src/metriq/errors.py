"""Exception hierarchy.

Errors split into two families that the command line maps onto exit codes:
``ValidationError`` (bad input, exit 2) and ``NumericalFailure`` (the numbers
cannot be trusted, exit 3).
"""


class MetriqError(Exception):
    exit_code = 1


class ValidationError(MetriqError, ValueError):
    exit_code = 2


class NumericalFailure(MetriqError, ArithmeticError):
    exit_code = 3


class InvalidParameter(ValidationError):
    pass


class ChartMismatch(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class FiducialMismatch(ValidationError):
    pass


class UnsupportedObservable(ValidationError):
    pass


class UnsupportedChart(ValidationError):
    pass


class InvalidSpin(ValidationError):
    pass


class PoleProximity(ValidationError):
    pass


class NotHermitian(ValidationError):
    pass


class NumericalOverflow(NumericalFailure):
    pass


class TailTruncation(NumericalFailure):
    pass


class EnergyBelowMinimum(NumericalFailure):
    pass


class NonSimpleContour(NumericalFailure):
    pass


class RootNotBracketed(NumericalFailure):
    pass


class VarianceBlowup(NumericalFailure):
    pass


class DiscretizationWarning(UserWarning):
    """Finite-difference step is too coarse for the requested accuracy."""
