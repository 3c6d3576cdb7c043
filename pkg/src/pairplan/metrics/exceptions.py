"""Exceptions for the metrics package."""

from pairplan.exceptions import PairPlanError


class MetricsContractError(PairPlanError):
    """A sub-score lies outside [0, 1] or is not finite."""

    def __init__(self, message: str) -> None:
        """Initialize the exception."""
        super().__init__(message, 0x03)
