"""Rollout followed by scoring, the reward every learner optimises."""

from pairplan.const import CLOSING_SPEED_FLOOR
from pairplan.geometry import Trajectory
from pairplan.metrics import ExtendedSubScores, pdms, subscores
from pairplan.settings import MetricsConfig

from .rollout import rollout
from .scenario import Scenario


def evaluate_trajectory(
    scenario: Scenario,
    trajectory: Trajectory,
    config: MetricsConfig | None = None,
    closing_floor: float = CLOSING_SPEED_FLOOR,
    previous_plan: Trajectory | None = None,
) -> ExtendedSubScores:
    """Sub-scores of a trajectory played in the scenario."""
    trace = rollout(scenario, trajectory, closing_floor)
    return subscores(trace, scenario, scenario.reference_progress, config, previous_plan)


def trajectory_pdms(
    scenario: Scenario, trajectory: Trajectory, config: MetricsConfig | None = None
) -> float:
    """PDMS of a trajectory played in the scenario."""
    return pdms(evaluate_trajectory(scenario, trajectory, config))
