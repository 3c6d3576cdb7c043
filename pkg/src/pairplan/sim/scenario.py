"""Scenario schema and its geometric helpers."""

import math
from typing import Literal, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from pairplan.const import SCENARIO_SCHEMA
from pairplan.geometry import DrivingCommand, Trajectory

from .exceptions import ScenarioError

Corruption = Literal["None", "OffroadDrift", "RedLightRun", "SlowProgress"]


class EgoState(BaseModel):
    """Ego pose, speed and footprint at t=0."""

    model_config = ConfigDict(frozen=True)

    x: float = Field(description="Longitudinal position", default=0.0)
    y: float = Field(description="Lateral position", default=0.0)
    h: float = Field(description="Heading in radians", default=0.0)
    speed: float = Field(description="Speed in m/s", default=0.0, ge=0)
    accel: float = Field(
        description="Longitudinal acceleration one step before t=0", default=0.0
    )
    half_length: float = Field(description="Footprint half length", default=2.2, gt=0)
    half_width: float = Field(description="Footprint half width", default=0.9, gt=0)

    @property
    def radius(self) -> float:
        """Radius of the bounding disc."""
        return math.hypot(self.half_length, self.half_width)


class AgentSpec(BaseModel):
    """A scripted, non-reactive road user."""

    model_config = ConfigDict(frozen=True)

    x: float = Field(description="Initial longitudinal position")
    y: float = Field(description="Initial lateral position")
    h: float = Field(description="Heading, held constant", default=0.0)
    half_length: float = Field(description="Footprint half length", gt=0)
    half_width: float = Field(description="Footprint half width", gt=0)
    speeds: list[float] = Field(description="Speed during each of the T steps")

    @property
    def radius(self) -> float:
        """Radius of the bounding disc."""
        return math.hypot(self.half_length, self.half_width)

    def poses(self, dt: float) -> np.ndarray:
        """Poses at steps 0..T as a (T+1, 3) array."""
        poses = np.empty((len(self.speeds) + 1, 3), dtype=np.float64)
        poses[0] = (self.x, self.y, self.h)
        direction = np.array([math.cos(self.h), math.sin(self.h)])
        for k, speed in enumerate(self.speeds):
            poses[k + 1, :2] = poses[k, :2] + speed * dt * direction
            poses[k + 1, 2] = self.h
        return poses


class DrivableGrid(BaseModel):
    """Boolean raster of the drivable area; row j is y, column i is x."""

    model_config = ConfigDict(frozen=True)

    origin: tuple[float, float] = Field(description="World position of cell (0, 0)")
    cell_size: float = Field(description="Cell edge length in meters", gt=0)
    width: int = Field(description="Cells along x", gt=0)
    height: int = Field(description="Cells along y", gt=0)
    rows: list[str] = Field(description="One '0'/'1' string per row of cells")

    _mask: np.ndarray | None = PrivateAttr(default=None)

    @model_validator(mode="after")
    def _check_shape(self) -> Self:
        if len(self.rows) != self.height or any(len(r) != self.width for r in self.rows):
            raise ScenarioError("Drivable grid rows do not match width x height")
        return self

    @classmethod
    def from_mask(cls, mask: np.ndarray, origin: tuple[float, float], cell_size: float) -> Self:
        """Build the grid from a (height, width) boolean array."""
        rows = ["".join("1" if v else "0" for v in row) for row in mask]
        return cls(
            origin=origin,
            cell_size=cell_size,
            width=mask.shape[1],
            height=mask.shape[0],
            rows=rows,
        )

    @property
    def mask(self) -> np.ndarray:
        """The (height, width) boolean array."""
        if self._mask is None:
            raw = np.frombuffer("".join(self.rows).encode("ascii"), dtype=np.uint8)
            self._mask = (raw == ord("1")).reshape(self.height, self.width)
            self._mask.setflags(write=False)
        return self._mask

    def cell_centers(self) -> np.ndarray:
        """World coordinates of every cell centre, shape (height, width, 2)."""
        xs = self.origin[0] + (np.arange(self.width) + 0.5) * self.cell_size
        ys = self.origin[1] + (np.arange(self.height) + 0.5) * self.cell_size
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx, gy], axis=-1)

    def lookup(self, xy: np.ndarray) -> np.ndarray:
        """Drivable flag per point; points outside the grid are not drivable."""
        xy = np.atleast_2d(xy)
        cols = np.floor((xy[:, 0] - self.origin[0]) / self.cell_size).astype(int)
        rows = np.floor((xy[:, 1] - self.origin[1]) / self.cell_size).astype(int)
        inside = (cols >= 0) & (cols < self.width) & (rows >= 0) & (rows < self.height)
        result = np.zeros(xy.shape[0], dtype=bool)
        result[inside] = self.mask[rows[inside], cols[inside]]
        return result


class RouteProjection(BaseModel):
    """Route-relative coordinates of a set of points."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    s: np.ndarray
    lateral: np.ndarray
    tangent: np.ndarray


class Route(BaseModel):
    """Centerline polyline with cumulative arclength."""

    model_config = ConfigDict(frozen=True)

    points: list[tuple[float, float]] = Field(description="Centerline points")
    arclength: list[float] = Field(description="Cumulative arclength per point")

    @model_validator(mode="after")
    def _check_arclength(self) -> Self:
        if len(self.points) < 2 or len(self.points) != len(self.arclength):
            raise ScenarioError("Route needs at least two points with arclengths")
        if np.any(np.diff(self.arclength) <= 0):
            raise ScenarioError("Route arclength must be strictly increasing")
        return self

    @classmethod
    def from_points(cls, points: np.ndarray) -> Self:
        """Build a route, computing arclengths from the points."""
        seg = np.hypot(*np.diff(points, axis=0).T)
        arclength = np.concatenate([[0.0], np.cumsum(seg)])
        return cls(
            points=[(round(float(x), 6), round(float(y), 6)) for x, y in points],
            arclength=[round(float(s), 6) for s in arclength],
        )

    def _segments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        pts = np.asarray(self.points, dtype=np.float64)
        start = pts[:-1]
        delta = pts[1:] - pts[:-1]
        length = np.hypot(delta[:, 0], delta[:, 1])
        return start, delta, length, np.asarray(self.arclength[:-1], dtype=np.float64)

    def project(self, xy: np.ndarray) -> RouteProjection:
        """Arclength, signed lateral offset (left positive) and tangent heading."""
        xy = np.atleast_2d(np.asarray(xy, dtype=np.float64))
        start, delta, length, s0 = self._segments()
        rel = xy[:, None, :] - start[None, :, :]
        t = np.clip(
            np.einsum("nmk,mk->nm", rel, delta) / (length**2)[None, :], 0.0, 1.0
        )
        closest = start[None, :, :] + t[..., None] * delta[None, :, :]
        dist2 = np.sum((xy[:, None, :] - closest) ** 2, axis=-1)
        idx = np.argmin(dist2, axis=1)
        rows = np.arange(xy.shape[0])
        seg_delta = delta[idx]
        cross = seg_delta[:, 0] * rel[rows, idx, 1] - seg_delta[:, 1] * rel[rows, idx, 0]
        return RouteProjection(
            s=s0[idx] + t[rows, idx] * length[idx],
            lateral=cross / length[idx],
            tangent=np.arctan2(seg_delta[:, 1], seg_delta[:, 0]),
        )

    def interpolate(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Points and tangent headings at the given arclengths."""
        s = np.clip(np.asarray(s, dtype=np.float64), self.arclength[0], self.arclength[-1])
        pts = np.asarray(self.points, dtype=np.float64)
        arc = np.asarray(self.arclength, dtype=np.float64)
        x = np.interp(s, arc, pts[:, 0])
        y = np.interp(s, arc, pts[:, 1])
        idx = np.clip(np.searchsorted(arc, s, side="right") - 1, 0, len(arc) - 2)
        delta = pts[idx + 1] - pts[idx]
        return np.stack([x, y], axis=-1), np.arctan2(delta[:, 1], delta[:, 0])

    @property
    def length(self) -> float:
        """Total arclength."""
        return self.arclength[-1]


class TrafficLight(BaseModel):
    """Stop line and its red phase."""

    model_config = ConfigDict(frozen=True)

    stop_line_s: float = Field(description="Stop-line arclength along the route")
    red_start: int = Field(description="First red step", ge=0)
    red_end: int = Field(description="Last red step, inclusive", ge=0)

    def is_red(self, step: int) -> bool:
        """Whether the light is red at a step."""
        return self.red_start <= step <= self.red_end


class Scenario(BaseModel):
    """A synthetic world for one planning problem, in the ego frame at t=0."""

    model_config = ConfigDict(frozen=True)

    schema_version: Literal["scenario_v1"] = Field(
        description="File format tag", default=SCENARIO_SCHEMA
    )
    id: str = Field(description="Unique scenario id")
    family: str = Field(description="Generator family")
    seed: int = Field(description="Generator seed")
    dt: float = Field(description="Step duration", gt=0)
    horizon: int = Field(description="Number of steps T", ge=1)
    ego: EgoState = Field(description="Ego state at t=0")
    agents: list[AgentSpec] = Field(description="Scripted agents", default=[])
    drivable_grid: DrivableGrid = Field(description="Drivable area raster")
    route: Route = Field(description="Route centerline")
    traffic_light: TrafficLight | None = Field(description="Optional light", default=None)
    expert: list[list[float]] = Field(description="Demonstration rows (t, x, y, h)")
    command: DrivingCommand = Field(description="Driving command")
    corruption: Corruption = Field(description="Corruption of the expert", default="None")
    reference_progress: float = Field(
        description="Progress of the clean rule expert, the EP denominator", default=0.0
    )

    _expert: Trajectory | None = PrivateAttr(default=None)

    @model_validator(mode="after")
    def _check_invariants(self) -> Self:
        if len(self.expert) != self.horizon + 1:
            raise ScenarioError(
                f"Expert has {len(self.expert)} rows, expected {self.horizon + 1}"
            )
        if not self.drivable_grid.lookup(np.array([[self.ego.x, self.ego.y]]))[0]:
            raise ScenarioError(f"Ego start of {self.id} is not drivable")
        for agent in self.agents:
            if len(agent.speeds) != self.horizon:
                raise ScenarioError("Agent speed profile must cover the horizon")
        return self

    @property
    def expert_trajectory(self) -> Trajectory:
        """The demonstration as a trajectory."""
        if self._expert is None:
            self._expert = Trajectory([row[1:4] for row in self.expert], dt=self.dt)
        return self._expert

    def with_expert(self, expert: Trajectory, corruption: Corruption | None = None) -> Self:
        """Copy of the scenario with another demonstration."""
        update: dict[str, object] = {"expert": expert.to_rows()}
        if corruption is not None:
            update["corruption"] = corruption
        return type(self).model_validate(self.model_dump() | update)

    def agent_poses(self) -> np.ndarray:
        """Poses of every agent at every step, shape (agents, T+1, 3)."""
        if not self.agents:
            return np.zeros((0, self.horizon + 1, 3))
        return np.stack([a.poses(self.dt) for a in self.agents])

    def agent_radii(self) -> np.ndarray:
        """Bounding disc radius per agent."""
        return np.array([a.radius for a in self.agents], dtype=np.float64)
