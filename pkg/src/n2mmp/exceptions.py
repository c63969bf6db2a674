"""Exception hierarchy shared by all toolkit modules."""


class N2MMPError(Exception):
    """Base class for every error raised by the toolkit."""


class SchemaError(N2MMPError):
    """A CSV header is missing a required column."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"missing required column {column!r}")


class ParseError(N2MMPError):
    """A cell could not be parsed or violates the sample invariants."""

    def __init__(self, row, column, message):
        self.row = row
        self.column = column
        super().__init__(f"row {row}, column {column!r}: {message}")


class EmptyDatasetError(N2MMPError):
    pass


class InsufficientDataError(N2MMPError):
    pass


class ScalerError(N2MMPError):
    """Raised when a column has zero spread and cannot be normalized."""


class UndefinedAngleError(N2MMPError):
    pass


class SingularDesignError(N2MMPError):
    def __init__(self, condition_number, threshold):
        self.condition_number = condition_number
        super().__init__(
            f"design matrix is rank deficient: condition number "
            f"{condition_number:.3e} exceeds {threshold:.0e}"
        )


class ConfigurationError(N2MMPError):
    pass


class TrainingDivergedError(N2MMPError):
    def __init__(self, epoch, message="training diverged"):
        self.epoch = epoch
        super().__init__(f"{message} at epoch {epoch}")


class OOBUndefinedError(N2MMPError):
    pass


class CholeskyError(N2MMPError):
    pass


class DegenerateFitError(N2MMPError):
    pass
