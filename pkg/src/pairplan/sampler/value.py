"""Exploitative leaf values used to prune the trajectory tree."""

from collections.abc import Sequence
import logging
from typing import Protocol

import numpy as np

from pairplan.geometry import LengthMismatchError, Trajectory, normalize_heading
from pairplan.settings import MetricsConfig
from pairplan.sim import Scenario, trajectory_pdms

log = logging.getLogger(__name__)


class LeafValue(Protocol):
    """Scores branch prefixes; higher is better."""

    def __call__(self, prefixes: Sequence[np.ndarray]) -> np.ndarray:
        """Values of the given (depth+1, 3) point prefixes."""


def extend_with_reference(prefix: np.ndarray, reference: Trajectory) -> Trajectory:
    """Complete a prefix to the full horizon with the reference's remaining steps."""
    depth = prefix.shape[0] - 1
    if depth > reference.horizon:
        raise LengthMismatchError(
            f"Prefix of depth {depth} is longer than the horizon {reference.horizon}"
        )
    points = np.empty_like(reference.points)
    points[: depth + 1] = prefix
    steps = reference.steps()
    for k in range(depth + 1, points.shape[0]):
        points[k, :2] = points[k - 1, :2] + steps[k - 1, :2]
        points[k, 2] = normalize_heading(points[k - 1, 2] + steps[k - 1, 2])
    return Trajectory(points, dt=reference.dt)


class PrefixRolloutValue:
    """Simulator PDMS of each prefix extended by the reference."""

    def __init__(
        self,
        scenario: Scenario,
        reference: Trajectory,
        config: MetricsConfig | None = None,
    ) -> None:
        """Initialize the value provider for one scenario and reference."""
        self.scenario = scenario
        self.reference = reference
        self.config = config or MetricsConfig()

    def __call__(self, prefixes: Sequence[np.ndarray]) -> np.ndarray:
        """PDMS of every completed prefix."""
        values = np.empty(len(prefixes))
        for i, prefix in enumerate(prefixes):
            completed = extend_with_reference(prefix, self.reference)
            values[i] = trajectory_pdms(self.scenario, completed, self.config)
        log.debug("Prefix values for %s: %s", self.scenario.id, np.round(values, 3))
        return values
