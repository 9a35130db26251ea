"""Exception hierarchy shared by all modules."""


class MulticorrError(Exception):
    """Base class for every error raised by this package."""


class InvalidDimension(MulticorrError, ValueError):
    pass


class InvalidProbability(MulticorrError, ValueError):
    pass


class DimensionMismatch(MulticorrError, ValueError):
    pass


class NotHermitian(MulticorrError, ValueError):
    pass


class InvalidDirection(MulticorrError, ValueError):
    pass


class InvalidState(MulticorrError, ValueError):
    """A state failed its normalization or consistency checks."""


class ResourceLimit(MulticorrError):
    """A computation would exceed a configured size cap."""


class DenseLimitExceeded(ResourceLimit):
    pass


class ScanTooLarge(ResourceLimit):
    pass


class ColumnCapExceeded(ResourceLimit):
    pass


class SolverNumericalFailure(MulticorrError):
    def __init__(self, message: str, status: str = "numerical_failure"):
        super().__init__(message)
        self.status = status
