"""Exception hierarchy shared by the solvers, checks and the command line."""


class StoppingError(Exception):
    """Base class for every error raised by this package."""


class DistributionError(StoppingError, ValueError):
    """A candidate distribution could not be built."""


class NegativeValue(DistributionError):
    """A candidate value is negative."""


class NegativeProbability(DistributionError):
    """A probability is negative or out of range."""


class ProbabilitySumOutOfTolerance(DistributionError):
    """Atom probabilities do not sum to one."""


class EmptySupport(DistributionError):
    """A distribution has no atoms with positive mass."""


class NotTwoPoint(DistributionError):
    """A candidate does not have exactly two atoms."""


class InvalidLambda(StoppingError, ValueError):
    """Loss aversion is negative or not a number."""


class ReferenceNotOnGrid(StoppingError, ValueError):
    """A reference value is not a point of the solved grid."""


class ValueNotInSupport(StoppingError, ValueError):
    """An observed value is not in the candidate support."""


class TimeOutOfRange(StoppingError, IndexError):
    """A time index lies outside 1..n."""


class TableInstanceMismatch(StoppingError, ValueError):
    """A table was solved for a different instance."""


class InstanceTooLarge(StoppingError, ValueError):
    """Too many joint realizations to enumerate."""


class AlphaOutOfRange(StoppingError, ValueError):
    """A target probability lies outside (0, 1)."""


class DivisionByZeroValue(StoppingError, ZeroDivisionError):
    """A ratio has a zero denominator."""


class ToleranceNotReached(StoppingError, ArithmeticError):
    """A root search did not converge."""


class ExactModeTooLarge(StoppingError, ValueError):
    """Too many distinct candidates for the remaining-set recursion."""


class TooManyCandidates(StoppingError, ValueError):
    """Too many candidates to search every arrival order."""


class PropertyPreconditionViolated(StoppingError, ValueError):
    """A property does not apply to the given instance."""


class ParamOutOfRange(StoppingError, ValueError):
    """A scenario parameter lies outside its documented range."""


class InstanceParseError(StoppingError, ValueError):
    """An instance file is unreadable, malformed JSON, or violates the schema."""
