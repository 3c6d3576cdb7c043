"""Group extraction from the trajectory tree and trajectory log-probabilities."""

from collections.abc import Sequence
from dataclasses import dataclass
import logging
import math

import numpy as np

from pairplan.exceptions import ConfigurationError
from pairplan.geometry import (
    Intention,
    LengthMismatchError,
    Trajectory,
    TrajectoryTree,
)
from pairplan.nn import ContractViolation, GradientSet

from .bounds import unsquash
from .exceptions import SamplerError
from .policy import SamplerPolicy, log_density_grads, sampler_step, step_backward
from .tree import draw_latent, expand_tree, grow, prune, stage_lengths
from .value import LeafValue

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroupMember:
    """One sampled trajectory with everything needed to re-score it."""

    trajectory: Trajectory
    log_prob: float
    intentions: tuple[str, ...]
    latents: np.ndarray
    reference: bool = False


def group_capacity(intentions: int, stages: int, keep_k: int) -> int:
    """Most leaves the final stage can hold when earlier stages keep keep_k."""
    leaves = 1
    for _ in range(stages - 1):
        leaves = min(leaves * intentions, keep_k)
    return leaves * intentions


def max_group_size(policy: SamplerPolicy, group_size: int) -> int:
    """Largest group not above group_size that the sampler can fill."""
    stages = len(stage_lengths(policy.horizon, policy.sampler.stage_stride))
    keep_k = policy.sampler.keep_k or group_size
    return min(group_size, group_capacity(len(policy.intentions), stages, keep_k))


def _leaf_values(tree: TrajectoryTree, value: LeafValue | None) -> dict[int, float]:
    """Values per leaf; the reference leaf always ranks first."""
    leaves = tree.leaves()
    if value is None:
        scores = np.array([tree.nodes[leaf].log_prob for leaf in leaves])
    else:
        scores = np.asarray(value([tree.path_points(leaf) for leaf in leaves]), dtype=np.float64)
    values = dict(zip(leaves, scores.tolist(), strict=True))
    anchor = tree.reference_leaf()
    if anchor is not None:
        values[anchor] = math.inf
    return values


def _member(tree: TrajectoryTree, leaf: int, stride: int, dt: float) -> GroupMember:
    node = tree.nodes[leaf]
    path = tree.path(leaf)[1:]
    return GroupMember(
        trajectory=tree.trajectory(leaf, dt),
        log_prob=node.log_prob,
        intentions=tuple(tree.intention_path(leaf, stride)),
        latents=np.array([n.latent for n in path]),
        reference=node.reference,
    )


def _dedupe(members: list[GroupMember]) -> list[GroupMember]:
    seen: set[Trajectory] = set()
    unique = []
    for member in members:
        if member.trajectory not in seen:
            seen.add(member.trajectory)
            unique.append(member)
    return unique


def _flat_tree(
    policy: SamplerPolicy,
    reference: Trajectory,
    features: np.ndarray,
    group_size: int,
    rng: np.random.Generator | None,
    greedy: bool,
) -> TrajectoryTree:
    """Independent intention paths drawn from the prior, one per member."""
    tree = TrajectoryTree.rooted_at(reference[0])
    keep = policy.intentions.index(Intention.KEEP)
    lengths = stage_lengths(reference.horizon, policy.sampler.stage_stride)
    for g in range(group_size):
        node = tree.root_id
        on_reference = g == 0
        for length in lengths:
            for step in range(length):
                dist = sampler_step(policy, tree.path_points(node), reference, features)
                if step == 0:
                    if on_reference:
                        i = keep
                    elif greedy:
                        i = int(np.argmax(dist.log_prior))
                    else:
                        if rng is None:
                            raise SamplerError("Stochastic sampling needs a random generator")
                        i = int(rng.choice(len(policy.intentions), p=dist.prior / dist.prior.sum()))
                latent = np.zeros(3) if on_reference else draw_latent(dist, i, rng, greedy)
                node = grow(
                    tree, node, i, policy.intentions[i], dist, reference, latent, step == 0, on_reference
                )
    return tree


def sample_group(
    policy: SamplerPolicy,
    reference: Trajectory,
    features: np.ndarray,
    group_size: int,
    rng: np.random.Generator | None = None,
    value: LeafValue | None = None,
    greedy: bool = False,
) -> list[GroupMember]:
    """Sample a group of trajectories around the reference.

    Member 0 is always the reference branch (all Keep, zero latent), which
    reproduces `reference`. Without a value provider, pruning ranks leaves by
    their cumulative log-probability. Greedy mode takes every offset at its
    mean and drops duplicate trajectories, so it can return fewer members.

    Raises:
        ConfigurationError: If the group size is below two or not reachable
            under the intention count, stage stride and keep_k.

    """
    if group_size < 2:
        raise ConfigurationError(f"A group needs at least 2 members, got {group_size}")
    if reference.horizon != policy.horizon:
        raise LengthMismatchError(
            f"Reference has horizon {reference.horizon}, sampler expects {policy.horizon}"
        )
    stride = policy.sampler.stage_stride
    lengths = stage_lengths(reference.horizon, stride)
    capacity = max_group_size(policy, group_size)
    if capacity < group_size:
        raise ConfigurationError(
            f"Group size {group_size} exceeds the {capacity} leaves reachable with "
            f"{len(policy.intentions)} intentions over {len(lengths)} stages"
        )

    if policy.sampler.sampling == "flat":
        tree = _flat_tree(policy, reference, features, group_size, rng, greedy)
    else:
        keep_k = policy.sampler.keep_k or group_size
        tree = TrajectoryTree.rooted_at(reference[0])
        for stage in range(len(lengths)):
            tree = expand_tree(policy, tree, reference, features, rng, greedy)
            limit = group_size if stage == len(lengths) - 1 else keep_k
            if len(tree.leaves()) > limit:
                tree = prune(tree, limit, _leaf_values(tree, value))

    anchor = tree.reference_leaf()
    order = [anchor] + [leaf for leaf in tree.leaves() if leaf != anchor]
    members = [_member(tree, leaf, stride, reference.dt) for leaf in order]
    if greedy:
        members = _dedupe(members)
    log.debug(
        "Sampled %d members, log-probs in [%.3f, %.3f]",
        len(members),
        min(m.log_prob for m in members),
        max(m.log_prob for m in members),
    )
    return members


def _check_path(
    policy: SamplerPolicy, trajectory: Trajectory, reference: Trajectory, intentions: Sequence[str]
) -> list[int]:
    if trajectory.horizon != reference.horizon:
        raise LengthMismatchError(
            f"Trajectory has horizon {trajectory.horizon}, reference {reference.horizon}"
        )
    stages = len(stage_lengths(reference.horizon, policy.sampler.stage_stride))
    if len(intentions) != stages:
        raise SamplerError(f"Expected {stages} stage intentions, got {len(intentions)}")
    try:
        return [policy.intentions.index(name) for name in intentions]
    except ValueError as err:
        raise SamplerError(f"Intention path {list(intentions)} uses an unknown intention") from err


def recover_latents(
    policy: SamplerPolicy,
    trajectory: Trajectory,
    reference: Trajectory,
    features: np.ndarray,
    intentions: Sequence[str],
) -> tuple[np.ndarray, bool]:
    """Latents (T, 3) that reproduce the trajectory's offsets, and a clamp flag."""
    path = _check_path(policy, trajectory, reference, intentions)
    stride = policy.sampler.stage_stride
    offsets = trajectory.steps()
    latents = np.empty_like(offsets)
    flagged = False
    for t in range(trajectory.horizon):
        dist = sampler_step(policy, trajectory.points[: t + 1], reference, features)
        i = path[t // stride]
        latents[t], clamped = unsquash(offsets[t], dist.low[i], dist.high[i])
        flagged |= clamped
    return latents, flagged


def _evaluate(
    policy: SamplerPolicy,
    trajectory: Trajectory,
    reference: Trajectory,
    features: np.ndarray,
    intentions: Sequence[str],
    latents: np.ndarray | None,
    with_grad: bool,
) -> tuple[float, GradientSet | None]:
    path = _check_path(policy, trajectory, reference, intentions)
    if latents is None:
        latents, _ = recover_latents(policy, trajectory, reference, features, intentions)
    stride = policy.sampler.stage_stride
    grads = GradientSet.like(policy.params) if with_grad else None
    total = 0.0
    for t in range(trajectory.horizon):
        dist = sampler_step(policy, trajectory.points[: t + 1], reference, features)
        i = path[t // stride]
        stage_start = t % stride == 0
        total += dist.log_density(i, latents[t])
        if stage_start:
            total += float(dist.log_prior[i])
        if grads is not None:
            d_mean, d_log_std = log_density_grads(dist, i, latents[t])
            d_prior = np.zeros(len(policy.intentions))
            if stage_start:
                d_prior[i] = 1.0
            step_backward(policy, dist, d_mean, d_log_std, d_prior, grads)
    return total, grads


def traj_log_prob(
    policy: SamplerPolicy,
    trajectory: Trajectory,
    reference: Trajectory,
    features: np.ndarray,
    intentions: Sequence[str],
    latents: np.ndarray | None = None,
) -> float:
    """Log-probability of a trajectory along an intention path.

    Recorded latents give an exact re-evaluation; without them the latents
    are recovered from the trajectory's offsets by the clamped inverse squash.
    """
    total, _ = _evaluate(policy, trajectory, reference, features, intentions, latents, False)
    return total


def traj_log_prob_grad(
    policy: SamplerPolicy,
    trajectory: Trajectory,
    reference: Trajectory,
    features: np.ndarray,
    intentions: Sequence[str],
    latents: np.ndarray | None = None,
) -> tuple[float, GradientSet]:
    """traj_log_prob and its gradient with respect to the sampler parameters."""
    total, grads = _evaluate(policy, trajectory, reference, features, intentions, latents, True)
    if grads is None:
        raise ContractViolation("Log-probability evaluation returned no gradient")
    return total, grads


def member_log_prob(
    policy: SamplerPolicy,
    member: GroupMember,
    reference: Trajectory,
    features: np.ndarray,
    with_grad: bool = False,
) -> tuple[float, GradientSet | None]:
    """Re-score a group member under (possibly updated) sampler parameters."""
    return _evaluate(
        policy, member.trajectory, reference, features, member.intentions, member.latents, with_grad
    )
