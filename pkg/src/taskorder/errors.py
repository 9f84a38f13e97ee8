"""Exception types raised across the package.

Every error derives from :class:`TaskOrderError`, so the CLI can map any
library failure to a nonzero exit status with a single ``except`` clause.
"""


class TaskOrderError(ValueError):
    """Base class for all package errors."""


class NotSymmetric(TaskOrderError):
    pass


class NotUnitDiagonal(TaskOrderError):
    pass


class NotPSD(TaskOrderError):
    def __init__(self, smallest_eigenvalue: float, tol: float):
        self.smallest_eigenvalue = float(smallest_eigenvalue)
        self.tol = float(tol)
        super().__init__(
            f"matrix is not positive semi-definite: smallest eigenvalue "
            f"{self.smallest_eigenvalue:.3e} < -{tol:g}"
        )


class EntryOutOfRange(TaskOrderError):
    pass


class UnsupportedSize(TaskOrderError):
    pass


class RejectionBudgetExhausted(TaskOrderError):
    pass


class SizeMismatch(TaskOrderError):
    pass


class MOutOfRange(TaskOrderError):
    pass


class TooManyTasks(TaskOrderError):
    pass


class RankDeficient(TaskOrderError):
    pass


class Diverged(TaskOrderError):
    pass


class IndexOutOfRange(TaskOrderError, IndexError):
    pass


class NonpositiveBaseline(TaskOrderError):
    pass


class NegativeTransferError(TaskOrderError):
    pass


class ParseError(TaskOrderError):
    pass


class ShapeMismatch(TaskOrderError):
    pass
