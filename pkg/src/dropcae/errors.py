"""Exception types shared across the toolkit."""


class DropcaeError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(DropcaeError, ValueError):
    """Array shapes are inconsistent for the requested operation."""


class ParameterError(DropcaeError, ValueError):
    """A scalar argument is outside its legal range."""


class DomainError(DropcaeError, ValueError):
    """A value is outside the mathematical domain of an operation."""


class DataError(DropcaeError, ValueError):
    """Input data violates a content requirement (labels, classes, ...)."""


class FormatError(DropcaeError, ValueError):
    """A file does not conform to the HSIC container format.

    `offset` is the byte position where parsing failed.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class TrainingError(DropcaeError, RuntimeError):
    """Training diverged (non-finite loss)."""

    def __init__(self, message: str, epoch: int | None = None, batch: int | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
