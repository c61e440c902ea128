"""Exception hierarchy shared by every module.

``InputError`` subclasses map to CLI exit code 2, ``NumericError`` subclasses
to exit code 3.
"""


class DnError(Exception):
    """Base class for all package errors."""


class InputError(DnError, ValueError):
    """Invalid user input (shapes, invariants, file contents)."""

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class NumericError(DnError, ArithmeticError):
    """A numerical hypothesis failed at finite precision."""


class SingularInterior(NumericError):
    """The (perturbed) interior block has an eigenvalue at zero."""

    def __init__(self, message, margin=None):
        self.margin = margin
        super().__init__(message)


class NotMarkovian(NumericError):
    def __init__(self, message, violation=None):
        self.violation = violation
        super().__init__(message)


class NonDiagonalDifference(NumericError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class PositivityUnknown(NumericError):
    pass


class NonPositiveH(InputError):
    pass


class NotExcessive(NumericError):
    pass


class NotGaugeable(NumericError):
    pass


class MaxIterExceeded(NumericError):
    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)
