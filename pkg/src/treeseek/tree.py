"""Search tree: UCT scoring, selection, growth, and backpropagation.

The tree stores one node per executed subquery.  The root holds the original
input query; every other node holds the subquery whose execution created it.
Values are running means of the rewards backpropagated through each node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import (
    DepthExceededError,
    DuplicateChildError,
    InvalidArgumentError,
    NotFoundError,
    SearchExhaustedError,
)
from .textutil import normalize_text


@dataclass
class EvaluationRecord:
    """Reward bookkeeping attached to a node once its subquery was scored.

    ``snippet_id`` is the knowledge-memory id of the snippet this evaluation
    admitted, or None when the candidate was rejected (or nothing was
    retrieved).
    """

    snippet_id: int | None
    exploration: int
    retrieval: int
    combined: float


@dataclass
class TreeNode:
    id: int
    parent: int | None
    depth: int
    subquery: str
    children: list[int] = field(default_factory=list)
    visits: int = 0
    value: float = 0.0
    expanded: bool = False
    unexpandable: bool = False
    evaluation: EvaluationRecord | None = None


class SearchTree:
    """Append-only tree; node ids are dense and increase in creation order."""

    def __init__(self, query: str, max_depth: int):
        if not query or not query.strip():
            raise InvalidArgumentError("query must be non-empty")
        if max_depth < 1:
            raise InvalidArgumentError("max_depth must be a positive integer")
        self.max_depth = max_depth
        self.nodes: list[TreeNode] = [TreeNode(id=0, parent=None, depth=0, subquery=query)]

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def node(self, node_id: int) -> TreeNode:
        if not 0 <= node_id < len(self.nodes):
            raise NotFoundError(f"no node with id {node_id}")
        return self.nodes[node_id]

    def add_child(self, parent_id: int, subquery: str) -> int:
        parent = self.node(parent_id)
        if parent.depth >= self.max_depth:
            raise DepthExceededError(
                f"node {parent_id} is at depth {parent.depth} == max_depth {self.max_depth}"
            )
        if not subquery or not subquery.strip():
            raise InvalidArgumentError("subquery must be non-empty")
        key = normalize_text(subquery)
        for sibling_id in parent.children:
            if normalize_text(self.nodes[sibling_id].subquery) == key:
                raise DuplicateChildError(f"sibling with subquery {subquery!r} already exists")
        child = TreeNode(
            id=len(self.nodes), parent=parent_id, depth=parent.depth + 1, subquery=subquery
        )
        self.nodes.append(child)
        parent.children.append(child.id)
        return child.id

    def path_to_root(self, node_id: int) -> list[int]:
        """Node ids from ``node_id`` up to and including the root."""
        path = []
        current: int | None = self.node(node_id).id
        while current is not None:
            path.append(current)
            current = self.nodes[current].parent
        return path

    def path_subqueries(self, node_id: int) -> list[str]:
        """Subqueries along root -> node, excluding the root's input query."""
        ids = self.path_to_root(node_id)
        return [self.nodes[i].subquery for i in reversed(ids) if i != 0]

    def is_expandable(self, node_id: int) -> bool:
        node = self.node(node_id)
        return node.depth < self.max_depth and not node.expanded and not node.unexpandable

    def mark_expanded(self, node_id: int) -> None:
        self.node(node_id).expanded = True

    def mark_unexpandable(self, node_id: int) -> None:
        self.node(node_id).unexpandable = True

    def to_dict(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "nodes": [
                {
                    "id": n.id,
                    "parent": n.parent,
                    "children": list(n.children),
                    "subquery": n.subquery,
                    "depth": n.depth,
                    "visits": n.visits,
                    "value": n.value,
                    "expanded": n.expanded,
                    "unexpandable": n.unexpandable,
                    "evaluation": None
                    if n.evaluation is None
                    else {
                        "snippet_id": n.evaluation.snippet_id,
                        "exploration": n.evaluation.exploration,
                        "retrieval": n.evaluation.retrieval,
                        "combined": n.evaluation.combined,
                    },
                }
                for n in self.nodes
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SearchTree":
        raw_nodes = data["nodes"]
        tree = cls(raw_nodes[0]["subquery"], data["max_depth"])
        tree.nodes = []
        for raw in raw_nodes:
            ev = raw.get("evaluation")
            tree.nodes.append(
                TreeNode(
                    id=raw["id"],
                    parent=raw["parent"],
                    depth=raw["depth"],
                    subquery=raw["subquery"],
                    children=list(raw["children"]),
                    visits=raw["visits"],
                    value=raw["value"],
                    expanded=raw.get("expanded", False),
                    unexpandable=raw.get("unexpandable", False),
                    evaluation=None if ev is None else EvaluationRecord(**ev),
                )
            )
        return tree


def uct_score(node: TreeNode, parent_visits: int, w: float) -> float:
    """Mean value plus the exploration bonus w * sqrt(ln(N_parent) / N).

    An unvisited node scores infinite so that every materialized child is
    descended into at least once.
    """
    if node.visits < 0 or parent_visits < 0:
        raise InvalidArgumentError("visit counts must be non-negative")
    if w < 0:
        raise InvalidArgumentError("exploration weight must be non-negative")
    if node.visits == 0:
        return math.inf
    return node.value + w * math.sqrt(math.log(parent_visits) / node.visits)


def select(tree: SearchTree, w: float) -> int:
    """Descend by maximal UCT (ties: lowest child index) to an expandable node.

    Only branches that still contain an expandable node are considered, so a
    dead branch (e.g. fully grown to max depth) never traps the descent while
    work remains elsewhere.  Nodes at max depth, already-expanded nodes and
    nodes marked unexpandable are never returned.
    """
    viable = [False] * len(tree.nodes)
    for node in reversed(tree.nodes):  # children always carry higher ids
        viable[node.id] = tree.is_expandable(node.id) or any(
            viable[c] for c in node.children
        )
    if not viable[0]:
        raise SearchExhaustedError("no expandable node exists anywhere in the tree")
    current = tree.root
    while not tree.is_expandable(current.id):
        best = None
        best_score = -math.inf
        for child_id in current.children:
            if not viable[child_id]:
                continue
            score = uct_score(tree.nodes[child_id], current.visits, w)
            if best is None or score > best_score:
                best = child_id
                best_score = score
        current = tree.nodes[best]  # viable non-expandable nodes always have a viable child
    return current.id


def backpropagate(tree: SearchTree, node_id: int, reward: float) -> None:
    """Fold ``reward`` into the running means from ``node_id`` up to the root."""
    for nid in tree.path_to_root(node_id):
        node = tree.nodes[nid]
        node.value = (node.value * node.visits + reward) / (node.visits + 1)
        node.visits += 1
