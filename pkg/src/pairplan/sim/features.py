"""Fixed-length scene encoding shared by every network."""

from dataclasses import dataclass

import numpy as np

from pairplan.const import POSITION_SCALE
from pairplan.geometry import DrivingCommand
from pairplan.settings import NetConfig

from .exceptions import FeatureLayoutError
from .scenario import Scenario

ROUTE_SAMPLES = 8
ROUTE_SPACING = 5.0  # meters
SPEED_SCALE = 10.0
ACCEL_SCALE = 3.0
COMMANDS: tuple[DrivingCommand, ...] = tuple(DrivingCommand)


@dataclass(frozen=True)
class FeatureLayout:
    """Slices of the feature vector, in storage order; the rest is zero padding."""

    drivable: slice
    agents: slice
    agent_speed: slice
    route: slice
    ego: slice
    light: slice
    command: slice
    used: int

    @classmethod
    def for_config(cls, config: NetConfig, horizon: int) -> "FeatureLayout":
        """Layout for a pooling resolution and horizon.

        Raises:
            FeatureLayoutError: If the layout needs more than feature_dim slots.

        """
        cells = config.feature_pool**2
        sizes = [cells, cells, cells, 2 * ROUTE_SAMPLES, 2, 2 + horizon + 1, len(COMMANDS)]
        bounds = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        if bounds[-1] > config.feature_dim:
            raise FeatureLayoutError(
                f"Scene features need {bounds[-1]} slots, feature_dim is {config.feature_dim}"
            )
        slices = [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:], strict=True)]
        return cls(*slices, used=int(bounds[-1]))


def _pool(mask: np.ndarray, size: int) -> np.ndarray:
    """Mean of roughly equal blocks, shape (size, size)."""
    rows = np.array_split(np.arange(mask.shape[0]), size)
    cols = np.array_split(np.arange(mask.shape[1]), size)
    return np.array([[mask[np.ix_(r, c)].mean() for c in cols] for r in rows])


def _agent_rasters(scenario: Scenario, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Occupancy and speed-weighted occupancy of agent centres at t=0."""
    occupancy = np.zeros((size, size))
    speed = np.zeros((size, size))
    grid = scenario.drivable_grid
    extent_x = grid.width * grid.cell_size
    extent_y = grid.height * grid.cell_size
    for agent in scenario.agents:
        col = int(np.floor((agent.x - grid.origin[0]) / extent_x * size))
        row = int(np.floor((agent.y - grid.origin[1]) / extent_y * size))
        if 0 <= row < size and 0 <= col < size:
            occupancy[row, col] = min(occupancy[row, col] + 1.0, 1.0)
            speed[row, col] += (agent.speeds[0] if agent.speeds else 0.0) / SPEED_SCALE
    return occupancy, speed


def encode_scene(scenario: Scenario, config: NetConfig | None = None) -> np.ndarray:
    """Encode a scenario into a deterministic feature vector of length feature_dim."""
    config = config or NetConfig()
    layout = FeatureLayout.for_config(config, scenario.horizon)
    features = np.zeros(config.feature_dim)

    drivable = scenario.drivable_grid.mask.astype(np.float64)
    features[layout.drivable] = _pool(drivable, config.feature_pool).ravel()
    occupancy, speed = _agent_rasters(scenario, config.feature_pool)
    features[layout.agents] = occupancy.ravel()
    features[layout.agent_speed] = speed.ravel()

    route = scenario.route
    s0 = float(route.project(np.array([[scenario.ego.x, scenario.ego.y]])).s[0])
    ahead = s0 + ROUTE_SPACING * np.arange(1, ROUTE_SAMPLES + 1)
    points, _ = route.interpolate(ahead)
    features[layout.route] = (points / POSITION_SCALE).ravel()

    features[layout.ego] = (scenario.ego.speed / SPEED_SCALE, scenario.ego.accel / ACCEL_SCALE)

    light = scenario.traffic_light
    if light is not None:
        red = [1.0 if light.is_red(k) else 0.0 for k in range(scenario.horizon + 1)]
        features[layout.light] = [(light.stop_line_s - s0) / POSITION_SCALE, 1.0, *red]

    features[layout.command] = command_one_hot(scenario.command)
    return features


def command_one_hot(command: DrivingCommand) -> np.ndarray:
    """One-hot vector over the driving commands."""
    one_hot = np.zeros(len(COMMANDS))
    one_hot[COMMANDS.index(command)] = 1.0
    return one_hot
