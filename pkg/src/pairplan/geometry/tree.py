"""Trajectory tree grown by per-intention offset expansion."""

from collections.abc import Iterator
from dataclasses import dataclass, field
import logging
from typing import Self

import numpy as np

from .exceptions import TreeInvariantError
from .types import Trajectory, Waypoint

log = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class TreeNode:
    """One waypoint of the tree.

    `latent` holds the pre-squash draw that produced `offset`; both are None
    for the root.
    """

    id: int
    waypoint: Waypoint
    parent: int | None
    intention: str | None
    depth: int
    log_prob: float
    offset: np.ndarray | None = None
    latent: np.ndarray | None = None
    reference: bool = False


@dataclass
class TrajectoryTree:
    """A rooted tree of waypoints, nodes keyed by id."""

    nodes: dict[int, TreeNode] = field(default_factory=dict)
    root_id: int = 0
    next_id: int = 0

    @classmethod
    def rooted_at(cls, root: Waypoint) -> Self:
        """Create a tree with a single root node (a reference-branch node)."""
        tree = cls()
        tree.nodes[0] = TreeNode(
            id=0,
            waypoint=root,
            parent=None,
            intention=None,
            depth=0,
            log_prob=0.0,
            reference=True,
        )
        tree.next_id = 1
        return tree

    def copy(self) -> Self:
        """Shallow copy; nodes are immutable."""
        return type(self)(dict(self.nodes), self.root_id, self.next_id)

    def __len__(self) -> int:
        """Number of nodes."""
        return len(self.nodes)

    def __iter__(self) -> Iterator[TreeNode]:
        """Iterate nodes in id order."""
        return (self.nodes[i] for i in sorted(self.nodes))

    @property
    def root(self) -> TreeNode:
        """The root node."""
        return self.nodes[self.root_id]

    def add_child(
        self,
        parent_id: int,
        waypoint: Waypoint,
        intention: str,
        log_prob: float,
        offset: np.ndarray | None = None,
        latent: np.ndarray | None = None,
        reference: bool = False,
    ) -> int:
        """Attach a node one step below its parent and return its id."""
        if parent_id not in self.nodes:
            raise TreeInvariantError(f"Unknown parent node {parent_id}")
        node_id = self.next_id
        self.nodes[node_id] = TreeNode(
            id=node_id,
            waypoint=waypoint,
            parent=parent_id,
            intention=intention,
            depth=self.nodes[parent_id].depth + 1,
            log_prob=log_prob,
            offset=offset,
            latent=latent,
            reference=reference,
        )
        self.next_id += 1
        return node_id

    def children(self, node_id: int) -> list[int]:
        """Ids of the direct children, ascending."""
        return sorted(n.id for n in self.nodes.values() if n.parent == node_id)

    def leaves(self) -> list[int]:
        """Ids of all leaves, ascending."""
        parents = {n.parent for n in self.nodes.values() if n.parent is not None}
        return sorted(i for i in self.nodes if i not in parents)

    def leaf_depth(self) -> int:
        """Common depth of the leaves.

        Raises:
            TreeInvariantError: If the leaves sit at different depths.

        """
        depths = {self.nodes[i].depth for i in self.leaves()}
        if len(depths) != 1:
            raise TreeInvariantError(f"Ragged leaf depths {sorted(depths)}")
        return depths.pop()

    def path(self, node_id: int) -> list[TreeNode]:
        """Nodes from the root down to `node_id`."""
        nodes: list[TreeNode] = []
        current: int | None = node_id
        while current is not None:
            node = self.nodes[current]
            nodes.append(node)
            current = node.parent
        nodes.reverse()
        return nodes

    def path_points(self, node_id: int) -> np.ndarray:
        """Waypoints from the root to `node_id` as a (depth+1, 3) array."""
        return np.array([n.waypoint.as_array() for n in self.path(node_id)])

    def trajectory(self, node_id: int, dt: float) -> Trajectory:
        """The root-to-node path as a trajectory."""
        return Trajectory(self.path_points(node_id), dt=dt)

    def intention_path(self, node_id: int, stride: int) -> list[str]:
        """Intention of each stage along the path to `node_id`."""
        path = self.path(node_id)[1:]
        return [str(n.intention) for n in path[::stride]]

    def reference_leaf(self) -> int | None:
        """Id of the leaf on the reference branch, if it survived."""
        for leaf in self.leaves():
            if self.nodes[leaf].reference:
                return leaf
        return None

    def retain(self, keep: set[int]) -> Self:
        """Keep the given leaves and their ancestors; drop everything else."""
        alive: set[int] = set()
        for leaf in keep:
            if leaf not in self.nodes:
                raise TreeInvariantError(f"Unknown leaf {leaf}")
            alive.update(n.id for n in self.path(leaf))
        alive.add(self.root_id)
        pruned = type(self)(
            {i: n for i, n in self.nodes.items() if i in alive},
            self.root_id,
            self.next_id,
        )
        log.debug("Pruned tree from %d to %d nodes", len(self.nodes), len(pruned.nodes))
        return pruned
