"""Test the scenario generator, the rule expert, rollouts and scene features."""

# pylint: disable=protected-access,redefined-outer-name
import json
import logging
import math
from pathlib import Path

import numpy as np
import pytest
from pytest_subtests import SubTests

from pairplan.exceptions import ConfigurationError, PairPlanIOError
from pairplan.geometry import DrivingCommand, LengthMismatchError, Trajectory, Waypoint
from pairplan.settings import NetConfig
from pairplan.sim import (
    FeatureLayout,
    FeatureLayoutError,
    Scenario,
    ScenarioError,
    SimulationTrace,
    check_collision,
    encode_scene,
    evaluate_trajectory,
    generate_scenario,
    load_suite,
    min_ttc,
    rollout,
    save_suite,
    synthesize_expert,
)

logger = logging.getLogger(__name__)


def _trace(ego: np.ndarray, agents: np.ndarray, radii: list[float], dt: float = 0.5) -> SimulationTrace:
    """Trace with only the fields the TTC computation reads filled in."""
    steps = ego.shape[0]
    zeros = np.zeros(steps)
    return SimulationTrace(
        ego_poses=ego,
        agent_poses=agents,
        ego_radius=1.0,
        agent_radii=np.asarray(radii, dtype=np.float64),
        collision=np.zeros(steps, dtype=bool),
        off_drivable=np.zeros(steps, dtype=bool),
        lateral_deviation=zeros,
        route_s=zeros,
        route_tangent=zeros,
        accel=zeros,
        jerk=zeros,
        history_jerk=0.0,
        min_ttc=math.inf,
        stop_line_crossing=None,
        progress=0.0,
        dt=dt,
    )


def test_generation_is_deterministic() -> None:
    """Test that the same family and seed give the same scenario."""
    a = generate_scenario("StraightFollow", 7)
    b = generate_scenario("StraightFollow", 7)
    assert a.model_dump_json() == b.model_dump_json()
    assert generate_scenario("StraightFollow", 8).model_dump_json() != a.model_dump_json()


def test_generation_rejects_bad_input() -> None:
    """Test that unknown families and negative seeds are configuration errors."""
    with pytest.raises(ConfigurationError):
        generate_scenario("Roundabout", 0)
    with pytest.raises(ConfigurationError):
        generate_scenario("Turn", -1)


def test_scenarios_start_at_the_ego_origin(subtests: SubTests, suite: list[Scenario]) -> None:
    """Test that every scenario is in the ego frame with a drivable start."""
    for scenario in suite:
        with subtests.test(scenario.id):
            assert (scenario.ego.x, scenario.ego.y, scenario.ego.h) == (0.0, 0.0, 0.0)
            assert scenario.expert_trajectory.horizon == scenario.horizon
            np.testing.assert_allclose(scenario.expert_trajectory.points[0], [0.0, 0.0, 0.0])
            assert scenario.drivable_grid.lookup(np.zeros((1, 2)))[0]


def test_lead_brake_agent_stops() -> None:
    """Test that the LeadBrake lead decelerates monotonically to a standstill."""
    scenario = generate_scenario("LeadBrake", 3)
    speeds = scenario.agents[0].speeds
    assert all(a >= b for a, b in zip(speeds, speeds[1:], strict=False))
    assert speeds[-1] == 0.0
    assert min(speeds) >= 0.0


def test_clean_expert_is_safe(subtests: SubTests) -> None:
    """Test that the clean expert neither collides nor leaves the road."""
    for family in ("StraightFollow", "LeadBrake"):
        with subtests.test(family):
            scenario = generate_scenario(family, 1)
            scores = evaluate_trajectory(scenario, scenario.expert_trajectory)
            assert scores.nc == 1.0
            assert scores.dac == 1.0


def test_offroad_drift_leaves_the_road() -> None:
    """Test that the OffroadDrift corruption fails drivable area compliance."""
    scenario = generate_scenario("StraightFollow", 2)
    drift = synthesize_expert(scenario, "OffroadDrift")
    assert evaluate_trajectory(scenario, drift).dac == 0.0
    assert rollout(scenario, drift).off_drivable[-1]


def test_slow_progress_loses_progress() -> None:
    """Test that SlowProgress scores a lower EP than the clean expert."""
    scenario = generate_scenario("Turn", 4)
    clean = evaluate_trajectory(scenario, scenario.expert_trajectory)
    slow = evaluate_trajectory(scenario, synthesize_expert(scenario, "SlowProgress"))
    assert slow.ep < clean.ep


def test_red_light(subtests: SubTests) -> None:
    """Test that the clean expert stops for the light and RedLightRun does not."""
    for seed in range(3):
        scenario = generate_scenario("RedLight", seed)
        with subtests.test(scenario.id):
            assert scenario.traffic_light is not None
            assert evaluate_trajectory(scenario, scenario.expert_trajectory).tlc == 1.0
            run = synthesize_expert(scenario, "RedLightRun")
            assert evaluate_trajectory(scenario, run).tlc == 0.0


def test_red_light_run_without_light_is_clean() -> None:
    """Test that RedLightRun keeps the clean expert when there is no light."""
    scenario = generate_scenario("StraightFollow", 5)
    run = synthesize_expert(scenario, "RedLightRun")
    # stored experts are rounded to six decimals
    np.testing.assert_allclose(run.points, scenario.expert_trajectory.points, atol=1e-6)


def test_suite_corruption_share(suite: list[Scenario]) -> None:
    """Test that the suite corrupts the configured share of experts."""
    corrupted = [s for s in suite if s.corruption != "None"]
    assert len(suite) == 10
    assert len(corrupted) == 3
    for scenario in corrupted:
        if scenario.traffic_light is not None:
            assert scenario.corruption == "RedLightRun"
        else:
            assert scenario.corruption in ("OffroadDrift", "SlowProgress")


def test_scenario_invariants(scenario: Scenario) -> None:
    """Test that expert length and agent profiles are validated."""
    data = scenario.model_dump()
    with pytest.raises(ScenarioError):
        Scenario.model_validate(data | {"expert": data["expert"][:-1]})
    agents = [a | {"speeds": a["speeds"][:-1]} for a in data["agents"]]
    with pytest.raises(ScenarioError):
        Scenario.model_validate(data | {"agents": agents})


def test_check_collision_boundary() -> None:
    """Test that touching discs collide and separated discs do not."""
    foot = (3.0, 4.0)
    assert check_collision(Waypoint(0.0, 0.0, 0.0), foot, Waypoint(10.0, 0.0, 0.0), foot)
    assert not check_collision(Waypoint(0.0, 0.0, 0.0), foot, Waypoint(10.001, 0.0, 0.0), foot)
    with pytest.raises(ScenarioError):
        check_collision(Waypoint(), (0.0, 1.0), Waypoint(), foot)


def test_min_ttc() -> None:
    """Test TTC for a closing agent, a receding agent and no agents."""
    ego = np.zeros((3, 3))
    closing = np.array([[[12.0, 0.0, 0.0], [9.5, 0.0, 0.0], [9.5, 0.0, 0.0]]])
    # surface gaps 10 and 7.5 m, closing at 5 m/s over the first two steps
    assert min_ttc(_trace(ego, closing, [1.0])) == pytest.approx(1.5)
    receding = np.array([[[12.0, 0.0, 0.0], [14.0, 0.0, 0.0], [16.0, 0.0, 0.0]]])
    assert min_ttc(_trace(ego, receding, [1.0])) == math.inf
    assert min_ttc(_trace(ego, np.zeros((0, 3, 3)), [])) == math.inf


def test_rollout_agents_ignore_the_ego(scenario: Scenario) -> None:
    """Test that scripted agents follow the same poses whatever the ego does."""
    stay = Trajectory(np.zeros((scenario.horizon + 1, 3)), dt=scenario.dt)
    a = rollout(scenario, scenario.expert_trajectory)
    b = rollout(scenario, stay)
    np.testing.assert_array_equal(a.agent_poses, b.agent_poses)
    assert b.progress == pytest.approx(0.0)
    assert a.progress > 0.0


def test_rollout_length_mismatch(scenario: Scenario) -> None:
    """Test that a trajectory with the wrong horizon is rejected."""
    with pytest.raises(LengthMismatchError):
        rollout(scenario, Trajectory(np.zeros((3, 3)), dt=scenario.dt))


def test_suite_round_trip(tmp_path: Path, suite: list[Scenario]) -> None:
    """Test that a saved suite loads back in manifest order."""
    manifest = save_suite(suite, tmp_path / "suite")
    assert manifest.name == "manifest.json"
    loaded = load_suite(tmp_path / "suite")
    assert [s.id for s in loaded] == [s.id for s in suite]
    for original, restored in zip(suite, loaded, strict=True):
        assert restored.expert == original.expert
        assert restored.corruption == original.corruption


def test_load_suite_errors(tmp_path: Path, suite: list[Scenario]) -> None:
    """Test that unreadable and mis-tagged suites raise with the path."""
    with pytest.raises(PairPlanIOError) as err:
        load_suite(tmp_path / "missing")
    assert err.value.path == tmp_path / "missing" / "manifest.json"

    save_suite(suite[:1], tmp_path / "bad")
    manifest = tmp_path / "bad" / "manifest.json"
    data = json.loads(manifest.read_text(encoding="utf-8"))
    manifest.write_text(json.dumps(data | {"schema_version": "scenario_v0"}), encoding="utf-8")
    with pytest.raises(ScenarioError):
        load_suite(tmp_path / "bad")


def test_encode_scene(scenario: Scenario) -> None:
    """Test determinism, command locality and empty agent slots of the features."""
    net = NetConfig(feature_dim=96, feature_pool=4)
    layout = FeatureLayout.for_config(net, scenario.horizon)
    features = encode_scene(scenario, net)
    assert features.shape == (96,)
    np.testing.assert_array_equal(features, encode_scene(scenario, net))

    turned = encode_scene(scenario.model_copy(update={"command": DrivingCommand.TURN_LEFT}), net)
    changed = np.flatnonzero(features != turned)
    assert changed.size == 2
    assert all(layout.command.start <= i < layout.command.stop for i in changed)

    empty = encode_scene(scenario.model_copy(update={"agents": []}), net)
    assert not np.any(empty[layout.agents])
    assert not np.any(empty[layout.agent_speed])
    assert np.any(features[layout.agents])


def test_feature_layout_too_small() -> None:
    """Test that a feature dimension below the layout size is rejected."""
    with pytest.raises(FeatureLayoutError):
        FeatureLayout.for_config(NetConfig(feature_dim=16, feature_pool=4), 8)
