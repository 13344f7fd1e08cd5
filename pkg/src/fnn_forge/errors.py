"""Exception hierarchy shared by every module."""


class FnnForgeError(Exception):
    """Base class for all errors raised by the package."""


class InvalidArgument(FnnForgeError, ValueError):
    pass


class InsufficientDataError(FnnForgeError, ValueError):
    pass


class ZeroVarianceError(FnnForgeError, ValueError):
    pass


class ShapeError(FnnForgeError, ValueError):
    pass


class DegenerateReferenceError(FnnForgeError, ValueError):
    pass


class DivergenceError(FnnForgeError, ArithmeticError):
    """A simulated state became non-finite."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite state encountered at step {step}")


class NumericalError(FnnForgeError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, message, epoch=None, batch=None):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"{message} (epoch={epoch}, batch={batch})")


class CsvFormatError(FnnForgeError, ValueError):
    """Malformed CSV input; carries the offending row and column (1-based)."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = ""
        if row is not None:
            where = f" at row {row}" + (f", column {column}" if column is not None else "")
        super().__init__(message + where)
