"""Exception types shared across the package."""


class TypsgdError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(TypsgdError, ValueError):
    """An argument violates a documented precondition."""


class CapabilityError(TypsgdError, RuntimeError):
    """The request is valid but exceeds a hard computational budget."""


class NumericError(TypsgdError, ArithmeticError):
    """A computation produced non-finite values.

    Carries ``sample_index`` or ``iteration`` when known so the failing
    record can be located.
    """

    def __init__(self, message, sample_index=None, iteration=None):
        super().__init__(message)
        self.sample_index = sample_index
        self.iteration = iteration


class CsvFormatError(TypsgdError, ValueError):
    """A CSV file is malformed; carries the offending row/column."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column
