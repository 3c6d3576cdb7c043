"""Exceptions for the sim package."""

from pairplan.exceptions import PairPlanError


class ScenarioError(PairPlanError):
    """A scenario violates one of its invariants."""

    def __init__(self, message: str) -> None:
        """Initialize the exception."""
        super().__init__(message, 0x03)


class FeatureLayoutError(PairPlanError):
    """The scene feature layout does not fit the configured feature dimension."""

    def __init__(self, message: str) -> None:
        """Initialize the exception."""
        super().__init__(message, 0x02)
