"""Exception hierarchy shared by all diodeq modules."""


class DiodeqError(Exception):
    """Base class for every error raised by this package."""


class InputError(DiodeqError):
    """Invalid user input: bad schema, bad shape, bad parameter range."""


class SchemaError(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class EmptyDatasetError(InputError):
    pass


class ScaleDegenerateError(InputError):
    pass


class DimensionError(InputError):
    pass


class NotFittedError(DiodeqError):
    pass


class SingularMatrixError(DiodeqError):
    pass


class DegenerateTargetError(DiodeqError):
    pass


class ComputationError(DiodeqError):
    """Numerical failure during fitting or simulation."""


class SolverError(ComputationError):
    def __init__(self, message, voltage=None):
        super().__init__(message)
        self.voltage = voltage


class DivergenceError(ComputationError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class TruncationError(ComputationError):
    """Fock-space truncation leaked more norm than allowed."""

    def __init__(self, message, leak=None, layer=None):
        super().__init__(message)
        self.leak = leak
        self.layer = layer


class FitFailure(ComputationError):
    def __init__(self, message, fold=None):
        super().__init__(message)
        self.fold = fold


class ExtractionError(ComputationError):
    """A physics extraction stage could not produce a result."""
