"""Plan selection with a reward scorer, best-of-N and scorer adapters."""

from collections.abc import Callable, Sequence
import logging
from typing import Literal

import numpy as np

from pairplan.exceptions import ConfigurationError
from pairplan.geometry import DrivingCommand, Trajectory
from pairplan.sampler import extend_with_reference
from pairplan.settings import MetricsConfig
from pairplan.sim import Scenario, trajectory_pdms

from .model import RwmModel, RwmOutput, rwm_forward, rwm_forward_batch

log = logging.getLogger(__name__)

SelectionPolicy = Literal["reward", "confidence_weighted"]
Scorer = Callable[[Trajectory], RwmOutput]


def selection_key(output: RwmOutput, policy: SelectionPolicy = "reward") -> float:
    """Ranking value of a scored trajectory."""
    if policy == "confidence_weighted":
        return output.reward * output.confidence
    return output.reward


def select_plan(
    il_traj: Trajectory,
    candidates: Sequence[tuple[Trajectory, RwmOutput]],
    il_score: RwmOutput,
    policy: SelectionPolicy = "reward",
) -> Trajectory:
    """Pick the best of the IL trajectory and the candidates that beat it.

    Candidates predicted worse than the IL trajectory are discarded. Ties keep
    the IL trajectory, then the lowest candidate index.
    """
    best, best_key = il_traj, selection_key(il_score, policy)
    survivors = 0
    for trajectory, output in candidates:
        if output.reward < il_score.reward:
            continue
        survivors += 1
        key = selection_key(output, policy)
        if key > best_key:
            best, best_key = trajectory, key
    log.debug(
        "Selected %s plan from %d of %d candidates",
        "IL" if best is il_traj else "RL",
        survivors,
        len(candidates),
    )
    return best


def best_of_n(
    plans: Sequence[Trajectory], scorer: Scorer, policy: SelectionPolicy = "reward"
) -> Trajectory:
    """Highest-scoring plan, the lowest index on ties.

    Raises:
        ConfigurationError: If no plans are given.

    """
    if not plans:
        raise ConfigurationError("best_of_n needs at least one plan")
    keys = [selection_key(scorer(plan), policy) for plan in plans]
    return plans[int(np.argmax(keys))]


class OracleScorer:
    """Simulator PDMS dressed as an RWM with full confidence."""

    def __init__(self, scenario: Scenario, config: MetricsConfig | None = None) -> None:
        """Initialize the scorer for one scenario."""
        self.scenario = scenario
        self.config = config or MetricsConfig()

    def __call__(self, trajectory: Trajectory) -> RwmOutput:
        """True PDMS of the trajectory."""
        return RwmOutput(trajectory_pdms(self.scenario, trajectory, self.config), 1.0)

    def score_many(self, trajectories: Sequence[Trajectory]) -> list[RwmOutput]:
        """Score several trajectories."""
        return [self(t) for t in trajectories]


class RwmScorer:
    """A trained RWM bound to one scene."""

    def __init__(self, model: RwmModel, features: np.ndarray, command: DrivingCommand) -> None:
        """Initialize the scorer for one scene."""
        self.model = model
        self.features = features
        self.command = command

    def __call__(self, trajectory: Trajectory) -> RwmOutput:
        """Predicted reward and confidence."""
        return rwm_forward(self.model, self.features, self.command, trajectory)

    def score_many(self, trajectories: Sequence[Trajectory]) -> list[RwmOutput]:
        """Score several trajectories in one batch."""
        return rwm_forward_batch(self.model, self.features, self.command, trajectories)


class RwmValue:
    """Leaf value from RWM rewards of prefixes completed by the reference."""

    def __init__(self, scorer: RwmScorer | OracleScorer, reference: Trajectory) -> None:
        """Initialize the value provider."""
        self.scorer = scorer
        self.reference = reference

    def __call__(self, prefixes: Sequence[np.ndarray]) -> np.ndarray:
        """Predicted rewards of the completed prefixes."""
        completed = [extend_with_reference(p, self.reference) for p in prefixes]
        return np.array([o.reward for o in self.scorer.score_many(completed)])
