"""Test waypoints, trajectories, frame transforms and the trajectory tree."""

# pylint: disable=protected-access,redefined-outer-name
import math

import numpy as np
import pytest
from pytest_subtests import SubTests

from pairplan.geometry import (
    GeometryError,
    LengthMismatchError,
    OffsetStep,
    Trajectory,
    TrajectoryTree,
    TreeInvariantError,
    Waypoint,
    apply_offsets,
    from_ego_frame,
    normalize_heading,
    to_ego_frame,
)


def test_normalize_heading(subtests: SubTests) -> None:
    """Test that headings wrap into (-pi, pi]."""
    cases = {
        "pi stays": (math.pi, math.pi),
        "minus pi maps to pi": (-math.pi, math.pi),
        "three halves pi": (1.5 * math.pi, -0.5 * math.pi),
        "zero": (0.0, 0.0),
        "many turns": (0.3 + 6 * math.pi, 0.3),
    }
    for name, (raw, expected) in cases.items():
        with subtests.test(name):
            assert normalize_heading(raw) == pytest.approx(expected, abs=1e-12)
    wrapped = normalize_heading(np.array([-math.pi, 3.0, 4.0]))
    assert isinstance(wrapped, np.ndarray)
    assert np.all((wrapped > -math.pi) & (wrapped <= math.pi))


def test_waypoint_validation() -> None:
    """Test that waypoints reject non-finite values and normalise headings."""
    assert Waypoint(1.0, 2.0, 2 * math.pi).h == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(GeometryError):
        Waypoint(math.nan, 0.0, 0.0)
    with pytest.raises(GeometryError):
        Waypoint(0.0, math.inf, 0.0)


def test_apply_offsets_constant_step() -> None:
    """Test that three unit steps along x end at x=3 with accumulated heading."""
    traj = apply_offsets(Waypoint(), [OffsetStep(1.0, 0.0, 0.1)] * 3)
    np.testing.assert_allclose(traj.points[:, 0], [0.0, 1.0, 2.0, 3.0])
    np.testing.assert_allclose(traj.points[:, 1], 0.0)
    np.testing.assert_allclose(traj.points[:, 2], [0.0, 0.1, 0.2, 0.3])
    assert traj.horizon == 3


def test_apply_offsets_length_checks() -> None:
    """Test that offset counts must match the horizon and be non-empty."""
    with pytest.raises(LengthMismatchError):
        apply_offsets(Waypoint(), [OffsetStep(1.0)] * 3, horizon=4)
    with pytest.raises(LengthMismatchError):
        apply_offsets(Waypoint(), np.zeros((0, 3)))


def test_steps_recover_offsets() -> None:
    """Test that the per-step offsets of a rolled-out trajectory are the inputs."""
    offsets = np.array([[1.0, 0.2, 0.05], [1.1, -0.1, -0.02], [0.9, 0.0, 0.0]])
    traj = apply_offsets(Waypoint(0.5, -0.5, 0.1), offsets)
    np.testing.assert_allclose(traj.steps(), offsets, atol=1e-12)


def test_trajectory_validation() -> None:
    """Test that malformed point arrays are rejected."""
    with pytest.raises(LengthMismatchError):
        Trajectory([[0.0, 0.0, 0.0]])
    with pytest.raises(LengthMismatchError):
        Trajectory([[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(GeometryError):
        Trajectory([[0.0, 0.0, 0.0], [math.nan, 0.0, 0.0]])
    with pytest.raises(GeometryError):
        Trajectory([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], dt=0.0)


def test_trajectory_is_read_only() -> None:
    """Test that the point array cannot be modified in place."""
    traj = Trajectory([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    with pytest.raises(ValueError):
        traj.points[0, 0] = 5.0


def test_trajectory_equality_and_hash() -> None:
    """Test that equal points and dt give equal, equally hashed trajectories."""
    a = Trajectory([[0.0, 0.0, 0.0], [1.0, 0.5, 0.1]])
    b = Trajectory([[0.0, 0.0, 0.0], [1.0, 0.5, 0.1]])
    c = Trajectory([[0.0, 0.0, 0.0], [1.0, 0.5, 0.1]], dt=0.25)
    assert a == b
    assert hash(a) == hash(b)
    assert a != c


def test_rows_round_trip() -> None:
    """Test that (t, x, y, h) rows rebuild the same trajectory."""
    traj = apply_offsets(Waypoint(), [OffsetStep(1.25, 0.5, 0.125)] * 4)
    rows = traj.to_rows()
    assert [row[0] for row in rows] == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert Trajectory.from_rows(rows) == traj


def test_check_kinematics_flags_fast_steps() -> None:
    """Test that spacing above v_max*dt is reported per step."""
    traj = Trajectory([[0.0, 0.0, 0.0], [5.0, 0.0, 0.0], [17.0, 0.0, 0.0]], dt=0.5)
    assert traj.check_kinematics(v_max=20.0) == [1]
    assert traj.check_kinematics(v_max=30.0) == []


def test_to_ego_frame_rotation() -> None:
    """Test that a point ahead on x appears on -y for a pose facing +y."""
    traj = Trajectory([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]])
    local = to_ego_frame(traj, Waypoint(0.0, 0.0, math.pi / 2))
    np.testing.assert_allclose(local.points[0], [0.0, -1.0, -math.pi / 2], atol=1e-12)
    np.testing.assert_allclose(local.points[1], [1.0, -1.0, -math.pi / 2], atol=1e-12)


def test_ego_frame_round_trip() -> None:
    """Test that from_ego_frame inverts to_ego_frame."""
    traj = apply_offsets(Waypoint(2.0, -1.0, 0.3), [OffsetStep(1.0, 0.3, 0.1)] * 5)
    pose = Waypoint(1.0, 2.0, 0.7)
    back = from_ego_frame(to_ego_frame(traj, pose), pose)
    np.testing.assert_allclose(back.points, traj.points, atol=1e-12)


def _chain_tree() -> TrajectoryTree:
    """Root with two branches: 1 -> 3 and 2 -> 4, plus 2 -> 5."""
    tree = TrajectoryTree.rooted_at(Waypoint())
    a = tree.add_child(0, Waypoint(1.0, 0.0, 0.0), "Keep", -1.0)
    b = tree.add_child(0, Waypoint(1.0, 1.0, 0.0), "Left", -2.0)
    tree.add_child(a, Waypoint(2.0, 0.0, 0.0), "Keep", -2.0)
    tree.add_child(b, Waypoint(2.0, 2.0, 0.0), "Left", -3.0)
    tree.add_child(b, Waypoint(2.0, 1.0, 0.0), "Keep", -3.5)
    return tree


def test_tree_structure() -> None:
    """Test leaves, depths and paths of a small tree."""
    tree = _chain_tree()
    assert len(tree) == 6
    assert tree.leaves() == [3, 4, 5]
    assert tree.children(2) == [4, 5]
    assert tree.leaf_depth() == 2
    assert [n.id for n in tree.path(4)] == [0, 2, 4]
    np.testing.assert_allclose(tree.path_points(4)[:, :2], [[0, 0], [1, 1], [2, 2]])
    assert tree.intention_path(4, stride=1) == ["Left", "Left"]


def test_tree_ragged_depth() -> None:
    """Test that leaves at different depths break the tree invariant."""
    tree = TrajectoryTree.rooted_at(Waypoint())
    a = tree.add_child(0, Waypoint(1.0, 0.0, 0.0), "Keep", 0.0)
    tree.add_child(0, Waypoint(1.0, 1.0, 0.0), "Left", 0.0)
    tree.add_child(a, Waypoint(2.0, 0.0, 0.0), "Keep", 0.0)
    with pytest.raises(TreeInvariantError):
        tree.leaf_depth()
    with pytest.raises(TreeInvariantError):
        tree.add_child(99, Waypoint(), "Keep", 0.0)


def test_tree_retain_drops_dead_ancestors() -> None:
    """Test that retaining one leaf removes branches without survivors."""
    tree = _chain_tree()
    kept = tree.retain({3})
    assert sorted(kept.nodes) == [0, 1, 3]
    assert kept.leaves() == [3]
    assert sorted(tree.nodes) == [0, 1, 2, 3, 4, 5]
    with pytest.raises(TreeInvariantError):
        tree.retain({42})
