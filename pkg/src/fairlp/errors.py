"""Exception and warning types raised across the package."""


class FairLPError(Exception):
    """Base class for all package errors."""


class InvalidInput(FairLPError, ValueError):
    """Shapes, alphabets or probability values are inconsistent."""


class EmptyData(InvalidInput):
    """A count tensor has zero total mass."""


class DegenerateConditioning(FairLPError):
    """A conditional distribution was requested on a zero-probability event."""


class InvalidProgram(FairLPError, ValueError):
    """A linear program has inconsistent dimensions or non-finite data."""


class NumericalFailure(FairLPError, RuntimeError):
    """The simplex method exceeded its iteration guard."""


class InfeasibleBudget(FairLPError):
    """The distortion budget lies below the smallest attainable distortion."""

    def __init__(self, budget: float, d_min: float, side: str = "pre"):
        self.budget = budget
        self.d_min = d_min
        self.side = side
        super().__init__(
            f"distortion budget {budget:.12g} is infeasible for {side}-processing; "
            f"d_min = {d_min:.12g}"
        )


class SubstitutionUnavailable(FairLPError):
    """The classifier lacks deterministic witnesses for both labels."""


class ConventionViolated(FairLPError):
    """The minority group is not the underprivileged one on both labels."""


class UnsupportedShape(InvalidInput):
    """The operation is only defined for binary alphabets."""


class TooLarge(FairLPError):
    """The brute-force grid would exceed the supported parameter count."""


class ParseError(FairLPError, ValueError):
    """A data file could not be parsed; carries the 1-based line number."""

    def __init__(self, path, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class DegenerateMarginal(UserWarning):
    """Some label has zero marginal probability."""
