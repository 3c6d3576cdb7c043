"""Geometric and trajectory primitives."""

from .exceptions import GeometryError, LengthMismatchError, TreeInvariantError
from .tree import TrajectoryTree, TreeNode
from .types import (
    DrivingCommand,
    Intention,
    OffsetStep,
    Trajectory,
    Waypoint,
    apply_offsets,
    from_ego_frame,
    normalize_heading,
    to_ego_frame,
)

__all__ = [
    "DrivingCommand",
    "GeometryError",
    "Intention",
    "LengthMismatchError",
    "OffsetStep",
    "Trajectory",
    "TrajectoryTree",
    "TreeInvariantError",
    "TreeNode",
    "Waypoint",
    "apply_offsets",
    "from_ego_frame",
    "normalize_heading",
    "to_ego_frame",
]
