"""Staged expansion and pruning of the trajectory tree."""

from collections.abc import Mapping
import logging
import math

import numpy as np

from pairplan.geometry import Intention, Trajectory, TrajectoryTree, TreeInvariantError, Waypoint

from .exceptions import SamplerError
from .policy import SamplerPolicy, StepDistribution, sampler_step

log = logging.getLogger(__name__)


def stage_lengths(horizon: int, stride: int) -> list[int]:
    """Steps per stage; the last stage is shorter when stride does not divide T."""
    return [min(stride, horizon - start) for start in range(0, horizon, stride)]


def draw_latent(
    dist: StepDistribution,
    intention: int,
    rng: np.random.Generator | None,
    greedy: bool,
) -> np.ndarray:
    """Gaussian latent draw, or the mean in greedy mode."""
    if greedy:
        return dist.latent_mean[intention].copy()
    if rng is None:
        raise SamplerError("Stochastic expansion needs a random generator")
    noise = rng.standard_normal(3)
    return dist.latent_mean[intention] + np.exp(dist.log_std[intention]) * noise


def grow(
    tree: TrajectoryTree,
    parent_id: int,
    intention: int,
    name: str,
    dist: StepDistribution,
    reference: Trajectory,
    latent: np.ndarray,
    stage_start: bool,
    on_reference: bool,
) -> int:
    """Attach one child under `parent_id` and return its id.

    A reference child takes its waypoint straight from the reference so the
    all-Keep branch reproduces it exactly.
    """
    parent = tree.nodes[parent_id]
    log_prob = parent.log_prob + dist.log_density(intention, latent)
    if stage_start:
        log_prob += float(dist.log_prior[intention])
    if on_reference:
        offset = reference.steps()[parent.depth]
        waypoint = Waypoint.from_array(reference.points[parent.depth + 1])
    else:
        offset = dist.offset(intention, latent)
        waypoint = Waypoint.from_array(parent.waypoint.as_array() + offset)
    return tree.add_child(parent_id, waypoint, name, log_prob, offset, latent, on_reference)


def expand_tree(
    policy: SamplerPolicy,
    tree: TrajectoryTree,
    reference: Trajectory,
    features: np.ndarray,
    rng: np.random.Generator | None = None,
    greedy: bool = False,
) -> TrajectoryTree:
    """Grow every leaf by one stage, one chain of offsets per intention.

    The intention is fixed within a stage and its log-prior is counted once,
    at the first step.

    Raises:
        TreeInvariantError: If the leaves are ragged or already at the horizon.

    """
    depth = tree.leaf_depth()
    if depth >= reference.horizon:
        raise TreeInvariantError(f"Leaves at depth {depth} cannot grow past T={reference.horizon}")
    length = min(policy.sampler.stage_stride, reference.horizon - depth)
    grown = tree.copy()
    for leaf in tree.leaves():
        first = sampler_step(policy, tree.path_points(leaf), reference, features)
        for i, name in enumerate(policy.intentions):
            on_reference = tree.nodes[leaf].reference and name == Intention.KEEP
            node, dist = leaf, first
            for step in range(length):
                if step:
                    dist = sampler_step(policy, grown.path_points(node), reference, features)
                latent = np.zeros(3) if on_reference else draw_latent(dist, i, rng, greedy)
                node = grow(grown, node, i, name, dist, reference, latent, step == 0, on_reference)
    log.debug(
        "Expanded %d leaves at depth %d into %d leaves", len(tree.leaves()), depth, len(grown.leaves())
    )
    return grown


def prune(tree: TrajectoryTree, keep_k: int, values: Mapping[int, float]) -> TrajectoryTree:
    """Keep the keep_k highest-valued leaves; ties go to the lower leaf id.

    Leaves without a value, or with a NaN value, rank last.
    """
    if keep_k < 1:
        raise SamplerError(f"keep_k must be at least 1, got {keep_k}")
    leaves = tree.leaves()
    if keep_k >= len(leaves):
        return tree

    def rank(leaf: int) -> tuple[float, int]:
        value = values.get(leaf, -math.inf)
        return (math.inf if math.isnan(value) else -value, leaf)

    return tree.retain(set(sorted(leaves, key=rank)[:keep_k]))
