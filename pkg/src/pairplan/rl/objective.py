"""Group-relative advantages, the clipped surrogate and the KL-regularised objective."""

from collections.abc import Sequence
from dataclasses import dataclass
import logging
import math

import numpy as np

from pairplan.const import BETA_MAX, BETA_MIN, DEGENERATE_STD
from pairplan.exceptions import ConfigurationError
from pairplan.geometry import Trajectory
from pairplan.nn import ContractViolation, GradientSet
from pairplan.sampler import GroupMember, SamplerPolicy, member_log_prob
from pairplan.settings import GrpoConfig

from .exceptions import NumericalError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Advantages:
    """Normalised advantages and whether the group carried no signal."""

    values: np.ndarray
    degenerate: bool


def group_advantage(rewards: Sequence[float]) -> Advantages:
    """(r - mean) / std with the population std; zeros when the std vanishes.

    Raises:
        ConfigurationError: If fewer than two rewards are given.

    """
    r = np.asarray(rewards, dtype=np.float64)
    if r.shape[0] < 2:
        raise ConfigurationError(f"A group needs at least 2 members, got {r.shape[0]}")
    std = float(r.std())
    if std < DEGENERATE_STD:
        return Advantages(np.zeros_like(r), True)
    return Advantages((r - r.mean()) / std, False)


def clipped_surrogate(ratio: float, advantage: float, eps: float) -> float:
    """min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A).

    Raises:
        NumericalError: If the ratio is not positive.

    """
    if not ratio > 0:
        raise NumericalError(f"Probability ratio must be positive, got {ratio}")
    clipped = min(max(ratio, 1.0 - eps), 1.0 + eps)
    return min(ratio * advantage, clipped * advantage)


def surrogate_is_clipped(ratio: float, advantage: float, eps: float) -> bool:
    """Whether the clipped branch is strictly the smaller one (zero gradient)."""
    clipped = min(max(ratio, 1.0 - eps), 1.0 + eps)
    return clipped * advantage < ratio * advantage


def kl_terms(new_lps: np.ndarray, old_lps: np.ndarray) -> np.ndarray:
    """Pointwise estimator exp(old - new) - (old - new) - 1, never negative."""
    delta = np.asarray(old_lps, dtype=np.float64) - np.asarray(new_lps, dtype=np.float64)
    return np.maximum(np.expm1(delta) - delta, 0.0)


def kl_estimate(new_lps: Sequence[float], old_lps: Sequence[float]) -> float:
    """Mean of the pointwise KL estimator over aligned members."""
    if len(new_lps) != len(old_lps):
        raise ConfigurationError(f"Cannot compare {len(new_lps)} with {len(old_lps)} log-probs")
    if not len(new_lps):
        return 0.0
    return float(np.mean(kl_terms(np.asarray(new_lps), np.asarray(old_lps))))


def update_beta(beta: float, measured_kl: float, target_kl: float, config: GrpoConfig | None = None) -> float:
    """Double beta above the tolerance band, halve it below, clamp the result."""
    config = config or GrpoConfig()
    if measured_kl > config.kl_tolerance * target_kl:
        beta *= config.beta_factor
    elif measured_kl < target_kl / config.kl_tolerance:
        beta /= config.beta_factor
    return float(np.clip(beta, max(config.beta_min, BETA_MIN), min(config.beta_max, BETA_MAX)))


@dataclass(frozen=True)
class GroupSample:
    """One scenario's sampled group, frozen at the snapshot policy."""

    scenario_id: str
    reference: Trajectory
    features: np.ndarray
    members: tuple[GroupMember, ...]
    rewards: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    degenerate: bool

    @classmethod
    def build(
        cls,
        scenario_id: str,
        reference: Trajectory,
        features: np.ndarray,
        members: Sequence[GroupMember],
        rewards: Sequence[float],
    ) -> "GroupSample":
        """Attach rewards to sampled members and normalise them."""
        if len(members) != len(rewards):
            raise ConfigurationError(f"{len(members)} members but {len(rewards)} rewards")
        advantages = group_advantage(rewards)
        return cls(
            scenario_id,
            reference,
            features,
            tuple(members),
            np.asarray(rewards, dtype=np.float64),
            np.array([m.log_prob for m in members]),
            advantages.values,
            advantages.degenerate,
        )

    @property
    def size(self) -> int:
        """Group size G."""
        return len(self.members)


@dataclass(frozen=True)
class ObjectiveResult:
    """J_RL, its gradient (ascent direction) and diagnostics."""

    value: float
    grads: GradientSet
    kl: float
    clipped: int
    skipped: bool = False


def grpo_objective(
    policy: SamplerPolicy, group: GroupSample, beta: float, eps: float
) -> ObjectiveResult:
    """Mean over members of the clipped surrogate minus beta times the KL estimate.

    The gradient points uphill: optimizers that minimise take its negative.
    A degenerate group yields a zero objective and gradient and is flagged
    as skipped.

    Raises:
        NumericalError: If a ratio is not positive or not finite.
        ContractViolation: If a member is re-scored without its gradient.

    """
    grads = GradientSet.like(policy.params)
    if group.degenerate:
        log.debug("Group %s has no reward spread, skipping", group.scenario_id)
        return ObjectiveResult(0.0, grads, 0.0, 0, True)

    g = group.size
    new_lps = np.empty(g)
    total = 0.0
    clipped = 0
    for i, member in enumerate(group.members):
        new_lp, member_grads = member_log_prob(
            policy, member, group.reference, group.features, with_grad=True
        )
        new_lps[i] = new_lp
        delta = group.old_log_probs[i] - new_lp
        try:
            ratio = math.exp(new_lp - group.old_log_probs[i])
        except OverflowError as err:
            raise NumericalError(f"Ratio overflow for member {i} of {group.scenario_id}") from err
        if not math.isfinite(ratio):
            raise NumericalError(f"Ratio is not finite for member {i} of {group.scenario_id}")
        advantage = float(group.advantages[i])
        total += clipped_surrogate(ratio, advantage, eps) - beta * float(kl_terms(new_lp, group.old_log_probs[i]))
        weight = -beta * (-math.expm1(delta))
        if surrogate_is_clipped(ratio, advantage, eps):
            clipped += 1
        else:
            weight += ratio * advantage
        if member_grads is None:
            raise ContractViolation(f"No gradient returned for member {i} of {group.scenario_id}")
        grads.values += (weight / g) * member_grads.values
    kl = kl_estimate(new_lps, group.old_log_probs)
    return ObjectiveResult(total / g, grads, kl, clipped)
