"""Exceptions for the rl package."""

from pairplan.exceptions import PairPlanError


class NumericalError(PairPlanError):
    """A quantity left its mathematically valid range."""

    def __init__(self, message: str) -> None:
        """Initialize the exception."""
        super().__init__(message, 0x05)
