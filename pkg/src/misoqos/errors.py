"""Exception hierarchy shared by all modules."""


class MisoQosError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(MisoQosError, ValueError):
    pass


class DomainError(MisoQosError, ValueError):
    pass


class NotPositiveDefinite(MisoQosError, ValueError):
    pass


class ZeroPowerUser(MisoQosError, ValueError):
    """A user has zero average MAC power, so its precoders cannot be normalized."""


class DegenerateDirection(MisoQosError, ValueError):
    """The receive direction is orthogonal to the user's mean effective channel."""


class DegenerateFilter(MisoQosError, ValueError):
    """The duality scaling system is singular or yields a non-positive scaling."""


class DegenerateUser(MisoQosError, ValueError):
    pass


class DegenerateSample(MisoQosError, ValueError):
    pass


class NoSolution(MisoQosError, ValueError):
    pass


class DualityError(MisoQosError, ArithmeticError):
    """Raised when a duality conversion breaks its power-preservation post-condition."""


class SolverError(MisoQosError, RuntimeError):
    """Base class for solver termination failures.

    ``result`` carries the state reached before giving up so that callers
    (e.g. the CLI) can still report the trajectory.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class Diverged(SolverError):
    pass


class MaxIterations(SolverError):
    pass


class BracketFailure(MisoQosError, RuntimeError):
    pass
