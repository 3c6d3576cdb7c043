"""Procedural scenario families, the rule-based expert and suite storage."""

from collections.abc import Iterable
from dataclasses import dataclass
import json
import logging
import math
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from pairplan.const import SCENARIO_SCHEMA
from pairplan.exceptions import ConfigurationError, PairPlanIOError
from pairplan.geometry import DrivingCommand, Trajectory
from pairplan.metrics import subscores
from pairplan.settings import ALL_FAMILIES, MetricsConfig, SimulatorConfig

from .exceptions import ScenarioError
from .rollout import rollout
from .scenario import (
    AgentSpec,
    Corruption,
    DrivableGrid,
    EgoState,
    Route,
    Scenario,
    TrafficLight,
)

log = logging.getLogger(__name__)

ROUTE_START_X = -20.0
ROUTE_END_X = 100.0
ROAD_MARGIN = 0.5
EXPERT_TARGET_ACCELS = (1.0, 0.5, 0.0, -0.5, -1.0, -1.5, -2.2)
EXPERT_SPEED_FRACTION = 0.9
EXPERT_JERK_FRACTION = 0.8
EXPERT_TTC_MARGIN = 1.2
OFFROAD_DRIFT = 6.5
SLOW_PROGRESS_LOSS = 0.25
MANIFEST = "manifest.json"


@dataclass
class _Band:
    """Drivable strip of [lo, hi] lateral offset around a polyline, limited in arclength."""

    polyline: np.ndarray
    lo: float
    hi: float
    s_min: float = -math.inf
    s_max: float = math.inf


def _round(value: float) -> float:
    return round(float(value), 6)


def _straight(y: float = 0.0, step: float = 1.0) -> np.ndarray:
    xs = np.arange(ROUTE_START_X, ROUTE_END_X + step, step)
    return np.stack([xs, np.full_like(xs, y)], axis=-1)


def _rasterize(bands: Iterable[_Band], config: SimulatorConfig) -> DrivableGrid:
    n = config.grid_cells
    xs = config.grid_origin[0] + (np.arange(n) + 0.5) * config.grid_cell
    ys = config.grid_origin[1] + (np.arange(n) + 0.5) * config.grid_cell
    gx, gy = np.meshgrid(xs, ys)
    centers = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    mask = np.zeros(centers.shape[0], dtype=bool)
    for band in bands:
        projection = Route.from_points(band.polyline).project(centers)
        mask |= (
            (projection.lateral >= band.lo)
            & (projection.lateral <= band.hi)
            & (projection.s >= band.s_min)
            & (projection.s <= band.s_max)
        )
    return DrivableGrid.from_mask(mask.reshape(n, n), config.grid_origin, config.grid_cell)


def _agent(x: float, y: float, speeds: Iterable[float], config: SimulatorConfig) -> AgentSpec:
    return AgentSpec(
        x=_round(x),
        y=_round(y),
        h=0.0,
        half_length=config.agent_half_extents[0],
        half_width=config.agent_half_extents[1],
        speeds=[_round(max(v, 0.0)) for v in speeds],
    )


def _two_lane_road(config: SimulatorConfig) -> list[_Band]:
    half = config.lane_width / 2
    return [_Band(_straight(), -half - ROAD_MARGIN, 3 * half + ROAD_MARGIN)]


def _layout(
    family: str, rng: np.random.Generator, config: SimulatorConfig
) -> tuple[np.ndarray, list[_Band], float, list[AgentSpec], DrivingCommand, TrafficLight | None]:
    """Route, drivable bands, ego speed, agents, command and light for a family."""
    horizon, dt = config.horizon, config.dt
    command = DrivingCommand.STRAIGHT
    light: TrafficLight | None = None
    agents: list[AgentSpec] = []
    half = config.lane_width / 2

    match family:
        case "StraightFollow":
            route = _straight()
            bands = _two_lane_road(config)
            v0 = rng.uniform(6.0, 10.0)
            lead_speed = v0 * rng.uniform(0.85, 1.05)
            agents.append(_agent(rng.uniform(18.0, 28.0), 0.0, [lead_speed] * horizon, config))
        case "LeadBrake":
            route = _straight()
            bands = _two_lane_road(config)
            v0 = rng.uniform(6.0, 9.0)
            decel = rng.uniform(4.0, 6.0)
            brake_step = int(rng.integers(0, 3))
            speeds = [
                v0 if k < brake_step else v0 - decel * dt * (k - brake_step + 1)
                for k in range(horizon)
            ]
            agents.append(_agent(rng.uniform(24.0, 32.0), 0.0, speeds, config))
        case "LaneChange":
            x1 = rng.uniform(4.0, 8.0)
            x2 = x1 + rng.uniform(18.0, 24.0)
            route = _straight()
            blend = np.clip((route[:, 0] - x1) / (x2 - x1), 0.0, 1.0)
            route[:, 1] = config.lane_width * (1.0 - np.cos(math.pi * blend)) / 2.0
            bands = [
                _Band(_straight(), -half - ROAD_MARGIN, half, s_max=x2 + 2.0 - ROUTE_START_X),
                _Band(_straight(config.lane_width), -half, half + ROAD_MARGIN),
            ]
            v0 = rng.uniform(6.0, 9.0)
            lead_speed = v0 + rng.uniform(0.5, 2.0)
            agents.append(
                _agent(rng.uniform(25.0, 35.0), config.lane_width, [lead_speed] * horizon, config)
            )
        case "Turn":
            sign = 1.0 if rng.random() < 0.5 else -1.0
            command = DrivingCommand.TURN_LEFT if sign > 0 else DrivingCommand.TURN_RIGHT
            straight_length = rng.uniform(6.0, 12.0)
            radius = rng.uniform(20.0, 30.0)
            lead_in = np.arange(ROUTE_START_X, straight_length - 0.5, 1.0)
            theta = np.linspace(0.0, math.pi / 2, int(math.ceil(radius * math.pi / 2)) + 1)
            arc = np.stack(
                [
                    straight_length + radius * np.sin(theta),
                    sign * radius * (1.0 - np.cos(theta)),
                ],
                axis=-1,
            )
            exit_d = np.arange(1.0, 61.0, 1.0)
            exit_leg = np.stack(
                [np.full_like(exit_d, straight_length + radius), sign * (radius + exit_d)],
                axis=-1,
            )
            route = np.concatenate(
                [np.stack([lead_in, np.zeros_like(lead_in)], axis=-1), arc, exit_leg]
            )
            bands = [_Band(route, -half - ROAD_MARGIN, half + ROAD_MARGIN)]
            v0 = rng.uniform(5.0, 8.0)
        case "RedLight":
            route = _straight()
            bands = _two_lane_road(config)
            v0 = rng.uniform(7.0, 10.0)
            stop_distance = v0**2 / (2.0 * rng.uniform(1.4, 1.9)) + 2.5
            light = TrafficLight(
                stop_line_s=_round(stop_distance - ROUTE_START_X),
                red_start=0,
                red_end=horizon,
            )
        case _:
            raise ConfigurationError(f"Unknown scenario family {family!r}")
    return route, bands, float(v0), agents, command, light


def generate_scenario(
    family: str,
    seed: int,
    config: SimulatorConfig | None = None,
    metrics_config: MetricsConfig | None = None,
) -> Scenario:
    """Build a scenario with its clean rule expert; deterministic in (family, seed, config).

    Raises:
        ConfigurationError: If the family is unknown or the seed is negative.

    """
    config = config or SimulatorConfig()
    if family not in ALL_FAMILIES:
        raise ConfigurationError(f"Unknown scenario family {family!r}")
    if seed < 0:
        raise ConfigurationError(f"Scenario seed must be non-negative, got {seed}")
    rng = np.random.default_rng([ALL_FAMILIES.index(family), seed])
    route_points, bands, v0, agents, command, light = _layout(family, rng, config)

    horizon = config.horizon
    placeholder = Trajectory(np.zeros((horizon + 1, 3)), dt=config.dt)
    draft = Scenario(
        id=f"{family.lower()}-{seed:06d}",
        family=family,
        seed=seed,
        dt=config.dt,
        horizon=horizon,
        ego=EgoState(
            speed=_round(v0),
            half_length=config.ego_half_extents[0],
            half_width=config.ego_half_extents[1],
        ),
        agents=agents,
        drivable_grid=_rasterize(bands, config),
        route=Route.from_points(route_points),
        traffic_light=light,
        expert=placeholder.to_rows(),
        command=command,
    )
    expert = synthesize_expert(draft, "None", config, metrics_config)
    progress = rollout(draft, expert, config.closing_speed_floor).progress
    scenario = Scenario.model_validate(
        draft.model_dump()
        | {"expert": expert.to_rows(), "reference_progress": _round(progress)}
    )
    log.debug("Generated %s with reference progress %.2f m", scenario.id, progress)
    return scenario


def _ramp_speeds(
    v0: float, a0: float, target: float, steps: int, dt: float, cap: float, jerk_step: float
) -> np.ndarray:
    """Per-step speeds u_1..u_T under a rate-limited approach to a target acceleration."""
    speeds = np.empty(steps, dtype=np.float64)
    previous_speed, previous_accel = v0, a0
    for k in range(steps):
        accel = previous_accel + float(np.clip(target - previous_accel, -jerk_step, jerk_step))
        speed = previous_speed + accel * dt
        if speed < 0.0:
            speed, accel = 0.0, -previous_speed / dt
        elif speed > cap and accel > 0:
            speed = max(cap, previous_speed)
            accel = (speed - previous_speed) / dt
        speeds[k] = speed
        previous_speed, previous_accel = speed, accel
    return speeds


def _follow_route(
    scenario: Scenario, distances: np.ndarray, lateral: np.ndarray | None = None
) -> Trajectory:
    """Trajectory travelling the given per-step distances along the route."""
    s0 = float(scenario.route.project(np.array([[scenario.ego.x, scenario.ego.y]])).s[0])
    s = s0 + np.concatenate([[0.0], np.cumsum(distances)])
    xy, heading = scenario.route.interpolate(s)
    if lateral is not None:
        normal = np.stack([-np.sin(heading), np.cos(heading)], axis=-1)
        xy = xy + lateral[:, None] * normal
    heading[0] = scenario.ego.h
    xy[0] = (scenario.ego.x, scenario.ego.y)
    return Trajectory(np.column_stack([xy, heading]), dt=scenario.dt)


def _clean_speeds(
    scenario: Scenario, config: SimulatorConfig, metrics_config: MetricsConfig
) -> np.ndarray:
    """Highest-progress admissible speed profile among the ramp candidates."""
    dt = scenario.dt
    cap = max(EXPERT_SPEED_FRACTION * config.speed_limit, scenario.ego.speed)
    jerk_step = EXPERT_JERK_FRACTION * metrics_config.j_max * dt
    ranked: list[tuple[tuple[float, ...], np.ndarray]] = []
    for target in EXPERT_TARGET_ACCELS:
        speeds = _ramp_speeds(
            scenario.ego.speed, scenario.ego.accel, target, scenario.horizon, dt, cap, jerk_step
        )
        candidate = _follow_route(scenario, speeds * dt)
        trace = rollout(scenario, candidate, config.closing_speed_floor)
        scores = subscores(trace, scenario, 1.0, metrics_config)
        admissible = (
            min(scores.nc, scores.dac, scores.comfort, scores.hc, scores.ddc, scores.tlc) == 1.0
            and trace.min_ttc >= EXPERT_TTC_MARGIN * metrics_config.ttc_threshold
        )
        key = (
            float(admissible),
            scores.nc,
            scores.tlc,
            scores.dac,
            min(trace.min_ttc, 10.0),
            trace.progress,
        )
        if admissible:
            key = (1.0, trace.progress)
        ranked.append((key, speeds))
    best_key, best = max(ranked, key=lambda item: item[0])
    if best_key[0] < 1.0:
        log.warning("No admissible expert profile for %s, using the safest one", scenario.id)
    return best


def synthesize_expert(
    scenario: Scenario,
    corruption: Corruption = "None",
    config: SimulatorConfig | None = None,
    metrics_config: MetricsConfig | None = None,
) -> Trajectory:
    """Rule expert for a scenario, optionally corrupted.

    OffroadDrift drifts laterally off the road, RedLightRun keeps the initial
    speed through the stop line and SlowProgress sheds a growing share of the
    clean expert's distance. A RedLightRun on a scenario without a light
    returns the clean expert.
    """
    config = config or SimulatorConfig()
    metrics_config = metrics_config or MetricsConfig()
    speeds = _clean_speeds(scenario, config, metrics_config)
    dt, horizon = scenario.dt, scenario.horizon
    k = np.arange(horizon + 1, dtype=np.float64)

    match corruption:
        case "None":
            return _follow_route(scenario, speeds * dt)
        case "OffroadDrift":
            lateral = -OFFROAD_DRIFT * (1.0 - np.cos(math.pi * k / horizon)) / 2.0
            return _follow_route(scenario, speeds * dt, lateral)
        case "RedLightRun":
            if scenario.traffic_light is None:
                log.debug("%s has no traffic light, RedLightRun keeps the clean expert", scenario.id)
                return _follow_route(scenario, speeds * dt)
            return _follow_route(scenario, np.full(horizon, scenario.ego.speed * dt))
        case "SlowProgress":
            factor = 1.0 - SLOW_PROGRESS_LOSS * k[1:] / horizon
            return _follow_route(scenario, speeds * dt * factor)
    raise ConfigurationError(f"Unknown corruption {corruption!r}")


def build_suite(
    families: Iterable[str],
    per_family: int,
    seed: int,
    corrupted_fraction: float = 0.0,
    config: SimulatorConfig | None = None,
    metrics_config: MetricsConfig | None = None,
) -> list[Scenario]:
    """Generate per_family scenarios of every family and corrupt a share of the experts.

    RedLight scenarios get RedLightRun; the others alternate between
    OffroadDrift and SlowProgress.
    """
    families = list(families)
    if not families or per_family <= 0:
        raise ConfigurationError("A suite needs at least one family and one scenario")
    config = config or SimulatorConfig()
    scenarios = [
        generate_scenario(family, seed * 10_000 + i, config, metrics_config)
        for family in families
        for i in range(per_family)
    ]
    rng = np.random.default_rng(seed)
    n_corrupt = int(round(corrupted_fraction * len(scenarios)))
    chosen = sorted(int(i) for i in rng.permutation(len(scenarios))[:n_corrupt])
    for rank, index in enumerate(chosen):
        scenario = scenarios[index]
        mode: Corruption
        if scenario.traffic_light is not None:
            mode = "RedLightRun"
        else:
            mode = "OffroadDrift" if rank % 2 == 0 else "SlowProgress"
        expert = synthesize_expert(scenario, mode, config, metrics_config)
        scenarios[index] = scenario.with_expert(expert, mode)
    log.info(
        "Built suite of %d scenarios over %d families, %d corrupted",
        len(scenarios),
        len(families),
        n_corrupt,
    )
    return scenarios


def save_suite(scenarios: Iterable[Scenario], directory: Path | str) -> Path:
    """Write one JSON file per scenario plus a manifest; returns the manifest path."""
    directory = Path(directory)
    entries = []
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for scenario in scenarios:
            filename = f"{scenario.id}.json"
            (directory / filename).write_text(scenario.model_dump_json(indent=1), encoding="utf-8")
            entries.append(
                {
                    "id": scenario.id,
                    "family": scenario.family,
                    "corruption": scenario.corruption,
                    "file": filename,
                }
            )
        manifest = directory / MANIFEST
        manifest.write_text(
            json.dumps({"schema_version": SCENARIO_SCHEMA, "scenarios": entries}, indent=1),
            encoding="utf-8",
        )
    except OSError as err:
        raise PairPlanIOError("Cannot write scenario suite", directory) from err
    log.info("Saved %d scenarios to %s", len(entries), directory)
    return manifest


def load_suite(directory: Path | str) -> list[Scenario]:
    """Load the scenarios listed in a suite manifest, in manifest order.

    Raises:
        PairPlanIOError: If the manifest or a scenario file cannot be read.
        ScenarioError: If a file does not match the scenario schema.
        ConfigurationError: If the suite is empty.

    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise PairPlanIOError("Cannot read suite manifest", manifest_path) from err
    if manifest.get("schema_version") != SCENARIO_SCHEMA:
        raise ScenarioError(
            f"Suite schema {manifest.get('schema_version')!r} is not {SCENARIO_SCHEMA!r}"
        )
    scenarios = []
    for entry in manifest.get("scenarios", []):
        path = directory / entry["file"]
        try:
            raw = path.read_text(encoding="utf-8")
        except OSError as err:
            raise PairPlanIOError("Cannot read scenario", path) from err
        try:
            scenarios.append(Scenario.model_validate_json(raw))
        except ValidationError as err:
            raise ScenarioError(f"Invalid scenario file {path}: {err}") from err
    if not scenarios:
        raise ConfigurationError(f"Scenario suite {directory} is empty")
    return scenarios
