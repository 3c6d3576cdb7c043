"""Exceptions for the nn package."""

from pairplan.exceptions import PairPlanError


class ShapeError(PairPlanError):
    """An input or tensor does not match the layer manifest."""

    def __init__(self, message: str) -> None:
        """Initialize the exception."""
        super().__init__(message, 0x02)


class ContractViolation(PairPlanError):
    """A call broke a precondition, e.g. a cache from other parameters."""

    def __init__(self, message: str) -> None:
        """Initialize the exception."""
        super().__init__(message, 0x03)


class CheckpointFormatError(PairPlanError):
    """A checkpoint file is truncated or has an unknown format version."""

    def __init__(self, message: str, expected: str | None = None, found: str | None = None) -> None:
        """Initialize the exception with the expected and found format versions."""
        self.expected = expected
        self.found = found
        if expected is not None or found is not None:
            message = f"{message} (expected {expected!r}, found {found!r})"
        super().__init__(message, 0x04)
