"""Exception types shared across the package."""


class SolverFailure(RuntimeError):
    """Iterative linear solve did not reach tolerance within the iteration cap."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NumericalFailure(RuntimeError):
    """An optimization loop produced a non-finite loss or model."""


class GridParseError(ValueError):
    """A model grid file could not be parsed; carries the offending line number."""

    def __init__(self, message, line_no):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
