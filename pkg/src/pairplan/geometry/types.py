"""Waypoints, trajectories and the frame transforms between them."""

from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from enum import StrEnum
import logging
import math
from typing import Self

import numpy as np

from pairplan.const import DEFAULT_DT

from .exceptions import GeometryError, LengthMismatchError

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

ArrayLike = np.ndarray | Sequence[Sequence[float]]


def normalize_heading[T: (float, np.ndarray)](h: T) -> T:
    """Wrap headings into (-pi, pi]."""
    wrapped = h - TWO_PI * np.ceil((h - math.pi) / TWO_PI)
    wrapped = np.where(wrapped <= -math.pi, wrapped + TWO_PI, wrapped)
    if isinstance(h, np.ndarray):
        return wrapped
    return float(wrapped)


class Intention(StrEnum):
    """Discrete manoeuvre labels conditioning offset prediction."""

    KEEP = "Keep"
    LEFT = "Left"
    RIGHT = "Right"
    ACCELERATE = "Accelerate"
    DECELERATE = "Decelerate"


class DrivingCommand(StrEnum):
    """Navigation command of a scenario."""

    STRAIGHT = "Straight"
    TURN_LEFT = "TurnLeft"
    TURN_RIGHT = "TurnRight"


@dataclass(frozen=True, slots=True)
class Waypoint:
    """A pose in the ego frame at t=0."""

    x: float = 0.0
    y: float = 0.0
    h: float = 0.0

    def __post_init__(self) -> None:
        """Validate and normalize the heading."""
        if not all(math.isfinite(v) for v in (self.x, self.y, self.h)):
            raise GeometryError(f"Non-finite waypoint ({self.x}, {self.y}, {self.h})")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "h", normalize_heading(float(self.h)))

    def as_array(self) -> np.ndarray:
        """Return (x, y, h) as a float64 array."""
        return np.array([self.x, self.y, self.h], dtype=np.float64)

    @classmethod
    def from_array(cls, values: Sequence[float] | np.ndarray) -> Self:
        """Build a waypoint from an (x, y, h) sequence."""
        return cls(float(values[0]), float(values[1]), float(values[2]))


@dataclass(frozen=True, slots=True)
class OffsetStep:
    """Per-step displacement of a waypoint."""

    dx: float = 0.0
    dy: float = 0.0
    dh: float = 0.0

    def as_array(self) -> np.ndarray:
        """Return (dx, dy, dh) as a float64 array."""
        return np.array([self.dx, self.dy, self.dh], dtype=np.float64)


class Trajectory:
    """T+1 waypoints sampled every dt seconds.

    The point array is read-only; every operation returns a new trajectory.
    """

    __slots__ = ("_points", "dt")

    def __init__(self, points: ArrayLike | Sequence[Waypoint], dt: float = DEFAULT_DT) -> None:
        """Initialize the trajectory, normalizing every heading."""
        if len(points) > 0 and isinstance(points[0], Waypoint):
            array = np.array([p.as_array() for p in points], dtype=np.float64)  # type: ignore[union-attr]
        else:
            array = np.array(points, dtype=np.float64)
        if array.ndim != 2 or array.shape[1] != 3:
            raise LengthMismatchError(
                f"Trajectory points must have shape (T+1, 3), got {array.shape}"
            )
        if array.shape[0] < 2:
            raise LengthMismatchError("Trajectory needs at least two points")
        if not np.all(np.isfinite(array)):
            raise GeometryError("Trajectory contains non-finite values")
        if dt <= 0:
            raise GeometryError(f"dt must be positive, got {dt}")
        array[:, 2] = normalize_heading(array[:, 2])
        array.setflags(write=False)
        self._points = array
        self.dt = float(dt)

    @property
    def points(self) -> np.ndarray:
        """The (T+1, 3) read-only point array."""
        return self._points

    @property
    def horizon(self) -> int:
        """Number of steps T."""
        return self._points.shape[0] - 1

    def __len__(self) -> int:
        """Number of waypoints, T+1."""
        return self._points.shape[0]

    def __getitem__(self, index: int) -> Waypoint:
        """Waypoint at a step."""
        return Waypoint.from_array(self._points[index])

    def __iter__(self) -> Iterator[Waypoint]:
        """Iterate over the waypoints."""
        return (Waypoint.from_array(p) for p in self._points)

    def __eq__(self, other: object) -> bool:
        """Exact equality of points and dt."""
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.dt == other.dt and np.array_equal(self._points, other._points)

    def __hash__(self) -> int:
        """Hash of the raw point bytes."""
        return hash((self._points.tobytes(), self.dt))

    def __repr__(self) -> str:
        """Get the string representation of the trajectory."""
        return f"Trajectory(T={self.horizon}, dt={self.dt}, end={self._points[-1].tolist()})"

    def steps(self) -> np.ndarray:
        """Per-step offsets (T, 3), heading differences wrapped."""
        deltas = np.diff(self._points, axis=0)
        deltas[:, 2] = normalize_heading(deltas[:, 2])
        return deltas

    def flat(self) -> np.ndarray:
        """Row-major flattened copy of the points."""
        return self._points.reshape(-1).copy()

    def check_kinematics(self, v_max: float) -> list[int]:
        """Return the steps whose point spacing exceeds v_max*dt."""
        spacing = np.hypot(*np.diff(self._points[:, :2], axis=0).T)
        violations = [int(i) for i in np.flatnonzero(spacing > v_max * self.dt + 1e-9)]
        if violations:
            log.warning(
                "Trajectory exceeds the kinematic bound %.2f m/step at steps %s",
                v_max * self.dt,
                violations,
            )
        return violations

    def to_rows(self) -> list[list[float]]:
        """Rows of (t, x, y, h) with six decimals."""
        return [
            [round(t * self.dt, 6), *(round(float(v), 6) for v in point)]
            for t, point in enumerate(self._points)
        ]

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> Self:
        """Rebuild a trajectory from (t, x, y, h) rows."""
        if len(rows) < 2:
            raise LengthMismatchError("Trajectory rows need at least two entries")
        dt = float(rows[1][0]) - float(rows[0][0])
        return cls([list(row[1:4]) for row in rows], dt=round(dt, 6))


def apply_offsets(
    root: Waypoint,
    offsets: Sequence[OffsetStep] | np.ndarray,
    dt: float = DEFAULT_DT,
    horizon: int | None = None,
) -> Trajectory:
    """Roll the recurrence w_t = w_{t-1} + offset_{t-1} out from the root.

    Raises:
        LengthMismatchError: If the offset count does not match the horizon.

    """
    if isinstance(offsets, np.ndarray):
        steps = np.asarray(offsets, dtype=np.float64).reshape(-1, 3)
    else:
        steps = np.array([o.as_array() for o in offsets], dtype=np.float64).reshape(-1, 3)
    if horizon is not None and steps.shape[0] != horizon:
        raise LengthMismatchError(
            f"Expected {horizon} offsets, got {steps.shape[0]}"
        )
    if steps.shape[0] == 0:
        raise LengthMismatchError("At least one offset is required")
    points = np.empty((steps.shape[0] + 1, 3), dtype=np.float64)
    points[0] = root.as_array()
    for t in range(1, points.shape[0]):
        points[t, :2] = points[t - 1, :2] + steps[t - 1, :2]
        points[t, 2] = normalize_heading(points[t - 1, 2] + steps[t - 1, 2])
    return Trajectory(points, dt=dt)


def _rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]], dtype=np.float64)


def to_ego_frame(traj: Trajectory, pose: Waypoint) -> Trajectory:
    """Express a trajectory in the frame where `pose` is the origin with zero heading."""
    points = traj.points.copy()
    points[:, :2] = (points[:, :2] - [pose.x, pose.y]) @ _rotation(-pose.h).T
    points[:, 2] = normalize_heading(points[:, 2] - pose.h)
    return Trajectory(points, dt=traj.dt)


def from_ego_frame(traj: Trajectory, pose: Waypoint) -> Trajectory:
    """Inverse of to_ego_frame."""
    points = traj.points.copy()
    points[:, :2] = points[:, :2] @ _rotation(pose.h).T + [pose.x, pose.y]
    points[:, 2] = normalize_heading(points[:, 2] + pose.h)
    return Trajectory(points, dt=traj.dt)
