"""Exception hierarchy shared by all solver modules."""


class RoughFDError(Exception):
    """Base class for all errors raised by roughfd."""


class InvalidArgumentError(RoughFDError, ValueError):
    """An argument violates a documented precondition."""


class StabilityViolationError(RoughFDError):
    """A time step would violate the scheme's CFL condition."""


class PositivityViolationError(RoughFDError, ValueError):
    """A coefficient field is not strictly positive.

    ``cell`` holds the index of the first offending cell.
    """

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class NumericError(RoughFDError, ArithmeticError):
    """A non-finite value was produced where a finite one is required."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class DegenerateReferenceError(RoughFDError, ZeroDivisionError):
    """A relative error was requested against a reference of zero norm."""


class ConfigError(RoughFDError):
    """A configuration file is malformed or misses a required key."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
