"""Test the tree sampler: offset boxes, expansion, pruning and group extraction."""

# pylint: disable=protected-access,redefined-outer-name
import logging
import math

import numpy as np
import pytest
from pytest_subtests import SubTests

from pairplan.exceptions import ConfigurationError
from pairplan.geometry import Trajectory, TrajectoryTree, TreeInvariantError, Waypoint
from pairplan.nn import ContractViolation, finite_diff_check
from pairplan.sampler import (
    PrefixRolloutValue,
    SamplerError,
    SamplerPolicy,
    expand_tree,
    extend_with_reference,
    group_capacity,
    prune,
    recover_latents,
    sample_group,
    sampler_step,
    traj_log_prob,
    traj_log_prob_grad,
    validate_intentions,
)
from pairplan.settings import ExperimentConfig
from pairplan.sim import Scenario

from .conftest import make_sampler

logger = logging.getLogger(__name__)


def test_zero_policy_distribution(zero_sampler: SamplerPolicy, reference: Trajectory, features: np.ndarray) -> None:
    """Test that zero parameters give box-centred means and a uniform prior."""
    dist = sampler_step(zero_sampler, reference.points[:1], reference, features)
    np.testing.assert_allclose(dist.mean_offsets, (dist.low + dist.high) / 2, atol=1e-12)
    keep = zero_sampler.intentions.index("Keep")
    np.testing.assert_allclose(dist.mean_offsets[keep], reference.steps()[0], atol=1e-12)
    np.testing.assert_allclose(dist.log_prior, -math.log(5.0), atol=1e-12)
    np.testing.assert_allclose(dist.log_std, -0.7)
    assert not dist.clamped.any()


def test_means_stay_inside_boxes(
    subtests: SubTests, config: ExperimentConfig, reference: Trajectory, features: np.ndarray
) -> None:
    """Test that mean offsets of random policies lie inside their boxes."""
    for seed in range(4):
        with subtests.test(f"seed {seed}"):
            policy = make_sampler(config, seed)
            for depth in (0, 3, 7):
                dist = sampler_step(policy, reference.points[: depth + 1], reference, features)
                assert np.all(dist.mean_offsets >= dist.low)
                assert np.all(dist.mean_offsets <= dist.high)


def test_smaller_std_raises_density_at_the_mean(
    config: ExperimentConfig, reference: Trajectory, features: np.ndarray
) -> None:
    """Test that a narrower latent distribution is denser at its mean."""
    wide = sampler_step(make_sampler(config, None), reference.points[:1], reference, features)
    narrow = sampler_step(
        make_sampler(config, None, log_std_init=-2.0), reference.points[:1], reference, features
    )
    assert narrow.log_density(0, narrow.latent_mean[0]) > wide.log_density(0, wide.latent_mean[0])


def test_expand_tree(zero_sampler: SamplerPolicy, reference: Trajectory, features: np.ndarray) -> None:
    """Test that each stage multiplies the leaves by the intention count."""
    rng = np.random.default_rng(0)
    tree = expand_tree(zero_sampler, TrajectoryTree.rooted_at(reference[0]), reference, features, rng)
    assert len(tree.leaves()) == 5
    assert tree.leaf_depth() == 2
    tree = expand_tree(zero_sampler, tree, reference, features, rng)
    assert len(tree.leaves()) == 25
    assert tree.leaf_depth() == 4
    anchor = tree.reference_leaf()
    assert anchor is not None
    np.testing.assert_array_equal(tree.path_points(anchor), reference.points[:5])


def test_unpruned_tree_reaches_full_size(
    zero_sampler: SamplerPolicy, reference: Trajectory, features: np.ndarray
) -> None:
    """Test that four unpruned stages of five intentions give 5**4 full-depth leaves."""
    rng = np.random.default_rng(1)
    tree = TrajectoryTree.rooted_at(reference[0])
    for _ in range(4):
        tree = expand_tree(zero_sampler, tree, reference, features, rng)
    assert len(tree.leaves()) == 625
    assert tree.leaf_depth() == 8
    anchor = tree.reference_leaf()
    assert anchor is not None
    np.testing.assert_array_equal(tree.path_points(anchor), reference.points)


def test_expand_past_horizon(config: ExperimentConfig, reference: Trajectory, features: np.ndarray) -> None:
    """Test that full-depth leaves cannot grow any further."""
    policy = make_sampler(config, None, stage_stride=config.simulator.horizon)
    tree = expand_tree(policy, TrajectoryTree.rooted_at(reference[0]), reference, features, greedy=True)
    assert tree.leaf_depth() == config.simulator.horizon
    with pytest.raises(TreeInvariantError):
        expand_tree(policy, tree, reference, features, greedy=True)


def test_stochastic_expansion_needs_rng(
    zero_sampler: SamplerPolicy, reference: Trajectory, features: np.ndarray
) -> None:
    """Test that sampling without a generator is refused."""
    with pytest.raises(SamplerError):
        expand_tree(zero_sampler, TrajectoryTree.rooted_at(reference[0]), reference, features)


def _three_leaves() -> TrajectoryTree:
    tree = TrajectoryTree.rooted_at(Waypoint())
    for dy in (0.0, 1.0, -1.0):
        tree.add_child(0, Waypoint(1.0, dy, 0.0), "Keep", 0.0)
    return tree


def test_prune(subtests: SubTests) -> None:
    """Test ranking, tie-breaking and NaN handling of the pruning step."""
    tree = _three_leaves()
    with subtests.test("highest values survive"):
        assert prune(tree, 2, {1: 3.0, 2: 1.0, 3: 2.0}).leaves() == [1, 3]
    with subtests.test("ties go to the lower id"):
        assert prune(tree, 2, {1: 0.5, 2: 0.5, 3: 0.5}).leaves() == [1, 2]
    with subtests.test("nan ranks last"):
        assert prune(tree, 2, {1: math.nan, 2: -5.0, 3: -1.0}).leaves() == [2, 3]
    with subtests.test("nothing to prune"):
        assert prune(tree, 3, {}) is tree
    with subtests.test("keep_k must be positive"):
        with pytest.raises(SamplerError):
            prune(tree, 0, {})


def test_sample_group(sampler: SamplerPolicy, reference: Trajectory, features: np.ndarray) -> None:
    """Test group size, the reference member and log-probability re-evaluation."""
    members = sample_group(sampler, reference, features, 15, np.random.default_rng(1))
    assert len(members) == 15
    first = members[0]
    assert first.reference
    assert first.intentions == ("Keep",) * 4
    np.testing.assert_array_equal(first.trajectory.points, reference.points)
    assert not any(m.reference for m in members[1:])
    for member in members[:4]:
        assert member.latents.shape == (8, 3)
        recomputed = traj_log_prob(
            sampler, member.trajectory, reference, features, member.intentions, member.latents
        )
        assert recomputed == pytest.approx(member.log_prob, abs=1e-9)


def test_sample_group_is_reproducible(sampler: SamplerPolicy, reference: Trajectory, features: np.ndarray) -> None:
    """Test that equal seeds give equal groups."""
    a = sample_group(sampler, reference, features, 6, np.random.default_rng(2))
    b = sample_group(sampler, reference, features, 6, np.random.default_rng(2))
    assert [m.trajectory for m in a] == [m.trajectory for m in b]


def test_traj_log_prob_gradient(sampler: SamplerPolicy, reference: Trajectory, features: np.ndarray) -> None:
    """Test that the log-probability gradient matches central differences."""
    member = sample_group(sampler, reference, features, 5, np.random.default_rng(3))[2]

    def loss_fn(params):
        return traj_log_prob_grad(
            sampler.with_params(params),
            member.trajectory,
            reference,
            features,
            member.intentions,
            member.latents,
        )

    report = finite_diff_check(sampler.params, loss_fn, tolerance=1e-4)
    assert report.passed, report


def test_recover_latents(sampler: SamplerPolicy, reference: Trajectory, features: np.ndarray) -> None:
    """Test latent recovery for an in-box member and an out-of-box trajectory."""
    member = sample_group(sampler, reference, features, 5, np.random.default_rng(4))[1]
    latents, flagged = recover_latents(sampler, member.trajectory, reference, features, member.intentions)
    assert not flagged
    np.testing.assert_allclose(latents, member.latents, atol=1e-6)

    ramp = np.zeros_like(reference.points)
    ramp[:, 0] = 5.0 * np.arange(reference.horizon + 1)
    shifted = Trajectory(reference.points + ramp, dt=reference.dt)
    _, flagged = recover_latents(sampler, shifted, reference, features, ["Keep"] * 4)
    assert flagged
    with pytest.raises(SamplerError):
        recover_latents(sampler, shifted, reference, features, ["Keep"] * 3)


def test_group_capacity(config: ExperimentConfig, reference: Trajectory, features: np.ndarray) -> None:
    """Test the reachable group size and the error above it."""
    assert group_capacity(5, 4, 15) == 75
    assert group_capacity(1, 4, 15) == 1
    keep_only = make_sampler(config, None, intentions=["Keep"])
    with pytest.raises(ConfigurationError):
        sample_group(keep_only, reference, features, 2, np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        sample_group(make_sampler(config, None), reference, features, 1, np.random.default_rng(0))


def test_flat_sampling(config: ExperimentConfig, reference: Trajectory, features: np.ndarray) -> None:
    """Test that independent intention paths fill the group around the reference."""
    policy = make_sampler(config, 0, sampling="flat")
    members = sample_group(policy, reference, features, 15, np.random.default_rng(5))
    assert len(members) == 15
    assert members[0].reference
    np.testing.assert_array_equal(members[0].trajectory.points, reference.points)


def test_greedy_members_are_distinct(sampler: SamplerPolicy, reference: Trajectory, features: np.ndarray) -> None:
    """Test that greedy sampling drops duplicate trajectories."""
    members = sample_group(sampler, reference, features, 15, greedy=True)
    assert 1 <= len(members) <= 15
    assert len({m.trajectory for m in members}) == len(members)
    assert members[0].reference


def test_prefix_rollout_value(
    zero_sampler: SamplerPolicy, scenario: Scenario, reference: Trajectory, features: np.ndarray
) -> None:
    """Test pruning by simulated prefix rollouts."""
    completed = extend_with_reference(reference.points[:3], reference)
    np.testing.assert_allclose(completed.points, reference.points, atol=1e-9)
    value = PrefixRolloutValue(scenario, reference)
    members = sample_group(zero_sampler, reference, features, 15, np.random.default_rng(6), value=value)
    assert len(members) == 15
    assert members[0].reference


def test_validate_intentions(subtests: SubTests) -> None:
    """Test that unknown, duplicate or Keep-less intention sets are refused."""
    validate_intentions(["Keep", "Left"])
    for name, intentions in {
        "unknown": ["Keep", "Fly"],
        "duplicate": ["Keep", "Keep"],
        "no keep": ["Left", "Right"],
    }.items():
        with subtests.test(name):
            with pytest.raises(SamplerError):
                validate_intentions(intentions)


def test_missing_gradient_is_a_contract_violation(
    monkeypatch: pytest.MonkeyPatch, sampler: SamplerPolicy, reference: Trajectory, features: np.ndarray
) -> None:
    """Test that a gradient request answered without gradients raises instead of passing silently."""
    member = sample_group(sampler, reference, features, 5, np.random.default_rng(8))[1]
    monkeypatch.setattr("pairplan.sampler.group._evaluate", lambda *args: (member.log_prob, None))
    with pytest.raises(ContractViolation):
        traj_log_prob_grad(sampler, member.trajectory, reference, features, member.intentions, member.latents)
