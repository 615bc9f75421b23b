"""Exception types shared across the package."""


class PseudoNetError(Exception):
    """Base class for all package errors."""


class DataError(PseudoNetError, ValueError):
    """Malformed input data (bad CSV cell, shape mismatch, ...)."""


class NumericalError(PseudoNetError, ArithmeticError):
    """Base class for numerical failures."""


class NotPositiveDefinite(NumericalError):
    pass


class ZeroDiagonal(NumericalError):
    pass


class LineSearchFailed(NumericalError):
    pass


class DegenerateRss(NumericalError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"non-positive residual sum of squares for columns {self.columns}")


class SingularRestrictedCovariance(NumericalError):
    def __init__(self, j):
        self.j = j
        super().__init__(f"restricted sample covariance for column {j} is not positive definite")


class DegenerateAllocation(NumericalError):
    pass


class ZeroRisk(NumericalError):
    pass


class ZeroPortfolio(NumericalError):
    pass


class InsufficientHistory(DataError):
    pass


class ConvergenceWarning(UserWarning):
    """Iteration limit reached before the stopping tolerance."""


def annotate(exc: BaseException, note: str) -> BaseException:
    """Attach context (grid cell, trial, period...) to an exception in flight."""
    if hasattr(exc, "add_note"):
        exc.add_note(note)
    elif exc.args and isinstance(exc.args[0], str):
        exc.args = (f"{exc.args[0]} [{note}]",) + exc.args[1:]
    else:
        exc.args = exc.args + (note,)
    return exc
