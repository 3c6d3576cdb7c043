"""Exceptions for the sampler package."""

from pairplan.exceptions import PairPlanError


class SamplerError(PairPlanError):
    """A sampler call broke a precondition."""

    def __init__(self, message: str) -> None:
        """Initialize the exception."""
        super().__init__(message, 0x03)
