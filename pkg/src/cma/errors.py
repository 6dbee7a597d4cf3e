"""Exception hierarchy shared by every part of the package."""


class CMAError(Exception):
    """Base class for all errors raised by :mod:`cma`."""


class InvalidDimension(CMAError, ValueError):
    pass


class InvalidResolution(CMAError, ValueError):
    pass


class InvalidExponent(CMAError, ValueError):
    pass


class ConstraintViolated(CMAError, ValueError):
    pass


class SubcriticalExponent(CMAError, ValueError):
    """Raised when p0 <= 2n, so the Moser exponent base b is not > 1."""


class RoughInput(CMAError, ValueError):
    """Pointwise differential checks need spectrally resolved data."""


class NotPositive(CMAError, ArithmeticError):
    """Some g + phi_{i jbar} is not positive definite."""


class SolverError(CMAError, RuntimeError):
    pass


class ContinuationStalled(SolverError):
    pass


class PositivityLost(SolverError):
    pass


class LinearSolveFailed(SolverError):
    pass


class ParseError(CMAError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class ValidationError(CMAError, ValueError):
    def __init__(self, field, constraint):
        self.field = field
        self.constraint = constraint
        super().__init__(f"{field}: {constraint}")
