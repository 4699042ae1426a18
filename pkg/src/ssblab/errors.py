"""Exception hierarchy shared by every module."""


class SSBError(Exception):
    """Base class for all library errors."""


class DomainError(SSBError, ValueError):
    """An argument lies outside the domain of the operation."""


class DimensionError(DomainError):
    """Array shapes do not agree."""


class KappaTooSmallError(DomainError):
    """The cell-index truncation leaves too much Gaussian mass uncovered."""


class NoSolutionError(DomainError):
    """A root-finding problem has no root in the admissible range."""


class InfeasibleError(DomainError):
    """A search hit its cap before meeting the target."""


class ConvergenceError(SSBError, ArithmeticError):
    """An iterative method ran out of budget.

    ``best_estimate`` holds whatever the method had when it gave up.
    """

    def __init__(self, message, best_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate
