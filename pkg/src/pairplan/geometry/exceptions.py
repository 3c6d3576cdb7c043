"""Exceptions for the geometry package."""

from pairplan.exceptions import PairPlanError


class GeometryError(PairPlanError):
    """Base exception for the geometry package."""


class LengthMismatchError(GeometryError):
    """A sequence does not have the length the horizon requires."""


class TreeInvariantError(GeometryError):
    """A trajectory tree operation would break the tree's structure."""
