"""Exception hierarchy shared by every feedopt module."""


class FeedoptError(Exception):
    """Base class for all errors raised by feedopt."""

    exit_code = 1


class InvalidInput(FeedoptError, ValueError):
    exit_code = 2


class DomainError(FeedoptError, ValueError):
    """A model map was evaluated outside the set where it is defined."""

    exit_code = 2


class NumericalFailure(FeedoptError, ArithmeticError):
    exit_code = 3


class SynthesisError(FeedoptError):
    exit_code = 3


class PreconditionError(SynthesisError):
    pass


class UnsupportedProblem(SynthesisError):
    pass


class NoSolution(FeedoptError):
    exit_code = 3


class FitFailure(FeedoptError):
    """Manifold fit did not reach its residual target.

    The best iterate seen is attached as ``best`` so callers can still
    inspect or use it.
    """

    exit_code = 3

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class Diverged(FeedoptError):
    """State norm left the divergence bound; ``partial`` holds the trajectory so far."""

    exit_code = 4

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
