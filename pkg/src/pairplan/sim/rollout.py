"""Non-reactive closed-loop rollout of an ego trajectory."""

from dataclasses import dataclass
import logging
import math

import numpy as np

from pairplan.const import CLOSING_SPEED_FLOOR
from pairplan.geometry import LengthMismatchError, Trajectory, Waypoint

from .exceptions import ScenarioError
from .scenario import Scenario

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimulationTrace:
    """Per-step bookkeeping of one rollout; every per-step array has T+1 entries."""

    ego_poses: np.ndarray
    agent_poses: np.ndarray
    ego_radius: float
    agent_radii: np.ndarray
    collision: np.ndarray
    off_drivable: np.ndarray
    lateral_deviation: np.ndarray
    route_s: np.ndarray
    route_tangent: np.ndarray
    accel: np.ndarray
    jerk: np.ndarray
    history_jerk: float
    min_ttc: float
    stop_line_crossing: int | None
    progress: float
    dt: float

    @property
    def horizon(self) -> int:
        """Number of steps T."""
        return self.ego_poses.shape[0] - 1


def check_collision(
    pose_a: Waypoint,
    foot_a: tuple[float, float],
    pose_b: Waypoint,
    foot_b: tuple[float, float],
) -> bool:
    """Closed disc-overlap test with radius equal to the half-extent diagonal.

    Raises:
        ScenarioError: If a half-extent is not positive.

    """
    if min(*foot_a, *foot_b) <= 0:
        raise ScenarioError(f"Half-extents must be positive, got {foot_a} and {foot_b}")
    gap = math.hypot(pose_a.x - pose_b.x, pose_a.y - pose_b.y)
    return gap <= math.hypot(*foot_a) + math.hypot(*foot_b)


def _center_gaps(ego_poses: np.ndarray, agent_poses: np.ndarray) -> np.ndarray:
    """Centre distances, shape (agents, T+1)."""
    delta = agent_poses[:, :, :2] - ego_poses[None, :, :2]
    return np.hypot(delta[..., 0], delta[..., 1])


def _min_ttc(
    ego_poses: np.ndarray,
    agent_poses: np.ndarray,
    ego_radius: float,
    agent_radii: np.ndarray,
    dt: float,
    closing_floor: float,
) -> float:
    if agent_poses.shape[0] == 0:
        return math.inf
    gaps = _center_gaps(ego_poses, agent_poses)
    closing = np.empty_like(gaps)
    closing[:, 0] = (gaps[:, 0] - gaps[:, 1]) / dt
    closing[:, 1:] = (gaps[:, :-1] - gaps[:, 1:]) / dt
    surface = np.maximum(gaps - (ego_radius + agent_radii)[:, None], 0.0)
    approaching = closing > 0
    if not np.any(approaching):
        return math.inf
    ttc = surface[approaching] / np.maximum(closing[approaching], closing_floor)
    return float(np.min(ttc))


def min_ttc(trace: SimulationTrace, closing_floor: float = CLOSING_SPEED_FLOOR) -> float:
    """Smallest surface-gap over closing-speed quotient; +inf if never closing."""
    return _min_ttc(
        trace.ego_poses,
        trace.agent_poses,
        trace.ego_radius,
        trace.agent_radii,
        trace.dt,
        closing_floor,
    )


def _speed_profile(points: np.ndarray, v0: float, dt: float) -> np.ndarray:
    """Speeds v_0..v_T, v_k = |p_k - p_{k-1}| / dt for k >= 1."""
    spacing = np.hypot(*np.diff(points[:, :2], axis=0).T)
    return np.concatenate([[v0], spacing / dt])


def rollout(
    scenario: Scenario,
    trajectory: Trajectory,
    closing_floor: float = CLOSING_SPEED_FLOOR,
) -> SimulationTrace:
    """Play a trajectory against the scenario's scripted agents.

    Leaving the grid counts as off-drivable. Accelerations and jerks are finite
    differences of the positional speeds, zero-padded at the start.

    Raises:
        LengthMismatchError: If the trajectory length is not T+1.

    """
    if trajectory.horizon != scenario.horizon:
        raise LengthMismatchError(
            f"Trajectory has {len(trajectory)} points, scenario needs {scenario.horizon + 1}"
        )
    dt = scenario.dt
    ego = trajectory.points
    agents = scenario.agent_poses()
    radii = scenario.agent_radii()
    ego_radius = scenario.ego.radius

    if agents.shape[0]:
        collision = np.any(
            _center_gaps(ego, agents) <= (ego_radius + radii)[:, None], axis=0
        )
    else:
        collision = np.zeros(ego.shape[0], dtype=bool)
    off_drivable = ~scenario.drivable_grid.lookup(ego[:, :2])
    projection = scenario.route.project(ego[:, :2])

    speeds = _speed_profile(ego, scenario.ego.speed, dt)
    accel = np.zeros_like(speeds)
    accel[1:] = np.diff(speeds) / dt
    jerk = np.zeros_like(speeds)
    jerk[2:] = np.diff(accel[1:]) / dt
    history_jerk = float((accel[1] - scenario.ego.accel) / dt)

    crossing: int | None = None
    light = scenario.traffic_light
    if light is not None:
        s = projection.s
        for k in range(1, s.shape[0]):
            if s[k - 1] < light.stop_line_s <= s[k]:
                crossing = k
                break

    trace = SimulationTrace(
        ego_poses=ego,
        agent_poses=agents,
        ego_radius=ego_radius,
        agent_radii=radii,
        collision=collision,
        off_drivable=off_drivable,
        lateral_deviation=np.abs(projection.lateral),
        route_s=projection.s,
        route_tangent=projection.tangent,
        accel=accel,
        jerk=jerk,
        history_jerk=history_jerk,
        min_ttc=_min_ttc(ego, agents, ego_radius, radii, dt, closing_floor),
        stop_line_crossing=crossing,
        progress=float(projection.s[-1] - projection.s[0]),
        dt=dt,
    )
    log.debug(
        "Rollout %s: collision=%s off_drivable=%s progress=%.2f min_ttc=%.2f",
        scenario.id,
        bool(collision.any()),
        bool(off_drivable.any()),
        trace.progress,
        trace.min_ttc,
    )
    return trace
