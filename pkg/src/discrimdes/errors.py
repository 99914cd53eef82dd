"""Exception hierarchy shared by every module."""


class DiscrimDesError(Exception):
    """Base class. ``exit_code`` drives the command-line status."""

    exit_code = 2


class ValidationError(DiscrimDesError, ValueError):
    exit_code = 1


class OutOfDomain(ValidationError):
    pass


class BadWeights(ValidationError):
    pass


class BadTheta(ValidationError):
    pass


class TooFewRuns(ValidationError):
    pass


class NumericalError(DiscrimDesError):
    """Raised when a computation cannot deliver its contract.

    ``diagnostics`` carries whatever partial result was available.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class NoConvergence(NumericalError):
    pass


class NotChebyshev(NumericalError):
    pass


class WrongAlternationCount(NumericalError):
    pass


class DegenerateResidual(NumericalError):
    pass


class DegenerateProblem(NumericalError):
    pass


class SingularReduced(NumericalError):
    pass


class EmptyPolytope(NumericalError):
    pass


class CombinatorialBlowup(NumericalError):
    pass


class DegenerateDesign(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class FitFailure(NumericalError):
    pass


class SingularInner(NumericalError):
    """Rank-deficient inner least squares (reported as a flag, not raised)."""
