"""Exploration provenance tree.

Every drill snapshot is a node holding a full, self-contained chart spec.
The active node's ancestor chain renders as a breadcrumb trail; complete
root-to-leaf paths form the parallel branch pool. Drilling from a visited
node implicitly forks: siblings are never copied or mutated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping

from .chartspec import ChartSpec, parse_spec, validate_structure
from .errors import (
    CannotDropRoot,
    InvalidSpec,
    NotALeaf,
    UnknownNode,
    UnknownParent,
)

#: Breadcrumb tokens truncate node labels to this many characters.
LABEL_WIDTH = 40


def _truncate(label: str) -> str:
    return label if len(label) <= LABEL_WIDTH else label[: LABEL_WIDTH - 1] + "…"


@dataclass(frozen=True)
class ExplorationNode:
    id: str
    parent: str | None
    spec: ChartSpec
    applied_filter_labels: tuple[str, ...]
    created_at: int
    label: str

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "parent": self.parent,
            "label": self.label,
            "applied_filter_labels": list(self.applied_filter_labels),
            "created_at": self.created_at,
            "spec": self.spec.to_json(),
        }


@dataclass(frozen=True)
class BranchDescriptor:
    leaf_id: str
    path_labels: tuple[str, ...]
    display_label: str

    def to_json(self) -> dict:
        return {
            "leaf_id": self.leaf_id,
            "path_labels": list(self.path_labels),
            "display_label": self.display_label,
        }


class ExplorationTree:
    """Rooted tree of chart-state snapshots with one active node."""

    def __init__(self, root_spec: ChartSpec, created_at: int = 0):
        if not isinstance(root_spec, ChartSpec):
            raise InvalidSpec("root spec must be a ChartSpec")
        report = validate_structure(root_spec)
        if not report.ok:
            raise InvalidSpec(f"root spec rejected: {report.describe()}")
        self._counter = 0
        root = ExplorationNode(
            id=self._next_id(),
            parent=None,
            spec=root_spec,
            applied_filter_labels=(),
            created_at=created_at,
            label="root",
        )
        self.nodes: dict[str, ExplorationNode] = {root.id: root}
        self.root_id = root.id
        self.active_id = root.id

    def _next_id(self) -> str:
        node_id = f"n{self._counter}"
        self._counter += 1
        return node_id

    # -- queries --------------------------------------------------------

    def node(self, node_id: str) -> ExplorationNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no node {node_id!r}") from None

    @property
    def active(self) -> ExplorationNode:
        return self.nodes[self.active_id]

    def children(self, node_id: str) -> list[ExplorationNode]:
        return [n for n in self.nodes.values() if n.parent == node_id]

    def _parent_ids(self) -> set[str]:
        return {n.parent for n in self.nodes.values() if n.parent is not None}

    def is_leaf(self, node_id: str) -> bool:
        return node_id not in self._parent_ids()

    def ancestors(self, node_id: str) -> Iterator[ExplorationNode]:
        """Root-to-node chain."""
        chain = []
        current: str | None = node_id
        while current is not None:
            node = self.node(current)
            chain.append(node)
            current = node.parent
        yield from reversed(chain)

    def breadcrumb(self) -> list[tuple[str, str]]:
        """The unique root-to-active path as (id, label) tokens."""
        return [(n.id, n.label) for n in self.ancestors(self.active_id)]

    def branches(self) -> list[BranchDescriptor]:
        """One descriptor per leaf, in leaf creation order."""
        parent_ids = self._parent_ids()
        out = []
        for node in self.nodes.values():  # insertion order = creation order
            if node.id not in parent_ids:
                path = tuple(n.label for n in self.ancestors(node.id))
                out.append(BranchDescriptor(node.id, path, node.label))
        return out

    # -- mutations ------------------------------------------------------

    def add_child(
        self,
        parent_id: str,
        spec: ChartSpec,
        applied_filter_labels: tuple[str, ...] = (),
        created_at: int = 0,
        label: str | None = None,
    ) -> str:
        """Attach a snapshot under ``parent_id`` and move the active cursor to it.

        Adding under a node that already has children starts a new branch;
        existing subtrees are left untouched.
        """
        if parent_id not in self.nodes:
            raise UnknownParent(f"no node {parent_id!r}")
        if label is None:
            label = applied_filter_labels[-1] if applied_filter_labels else "view"
        node = ExplorationNode(
            id=self._next_id(),
            parent=parent_id,
            spec=spec,
            applied_filter_labels=tuple(applied_filter_labels),
            created_at=created_at,
            label=_truncate(label),
        )
        self.nodes[node.id] = node
        self.active_id = node.id
        return node.id

    def jump_to(self, node_id: str) -> None:
        """Jump-to-state: restore a visited node's full snapshot as active."""
        self.active_id = self.node(node_id).id

    def switch_branch(self, leaf_id: str) -> None:
        node = self.node(leaf_id)
        if not self.is_leaf(node.id):
            raise NotALeaf(f"node {leaf_id!r} has children")
        self.active_id = node.id

    def reset(self) -> None:
        """Collapse back to the root; only the root node survives."""
        root = self.nodes[self.root_id]
        self.nodes = {self.root_id: root}
        self.active_id = self.root_id

    def drop_leaf(self, leaf_id: str) -> None:
        """Remove a failed leaf and restore its parent as active.

        Internal to the render-failure rollback path; analyst-facing
        navigation never removes nodes (reset aside).
        """
        node = self.node(leaf_id)
        if node.parent is None:
            raise CannotDropRoot("cannot drop the root node")
        if not self.is_leaf(leaf_id):
            raise NotALeaf(f"node {leaf_id!r} has children")
        del self.nodes[leaf_id]
        if self.active_id == leaf_id:
            self.active_id = node.parent

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "root_id": self.root_id,
            "active_id": self.active_id,
            "nodes": [n.to_json() for n in self.nodes.values()],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "ExplorationTree":
        nodes = {}
        max_counter = 0
        for entry in doc["nodes"]:
            node = ExplorationNode(
                id=entry["id"],
                parent=entry.get("parent"),
                spec=parse_spec(entry["spec"]),
                applied_filter_labels=tuple(entry.get("applied_filter_labels", ())),
                created_at=int(entry.get("created_at", 0)),
                label=entry["label"],
            )
            nodes[node.id] = node
            if node.id.startswith("n") and node.id[1:].isdigit():
                max_counter = max(max_counter, int(node.id[1:]) + 1)
        tree = cls.__new__(cls)
        tree.nodes = nodes
        tree.root_id = doc["root_id"]
        tree.active_id = doc["active_id"]
        tree._counter = max_counter
        if tree.root_id not in nodes or tree.active_id not in nodes:
            raise UnknownNode("root or active node missing from export")
        return tree


def check_invariants(tree: ExplorationTree) -> None:
    """Assert the tree-shape invariants; raises AssertionError on violation."""
    roots = [n for n in tree.nodes.values() if n.parent is None]
    assert len(roots) == 1 and roots[0].id == tree.root_id, "single-root violated"
    assert tree.active_id in tree.nodes, "active node missing"
    for node in tree.nodes.values():
        seen = set()
        current: str | None = node.id
        while current is not None:
            assert current not in seen, "cycle detected"
            seen.add(current)
            current = tree.nodes[current].parent
        assert tree.root_id in seen, "node disconnected from root"
    parent_ids = tree._parent_ids()
    leaves = [n for n in tree.nodes.values() if n.id not in parent_ids]
    assert len(tree.branches()) == len(leaves), "branch/leaf count mismatch"
    crumb = tree.breadcrumb()
    chain = [(n.id, n.label) for n in tree.ancestors(tree.active_id)]
    assert crumb == chain, "breadcrumb is not the ancestor chain"


__all__ = [
    "LABEL_WIDTH",
    "ExplorationNode",
    "BranchDescriptor",
    "ExplorationTree",
    "check_invariants",
]
