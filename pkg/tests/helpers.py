"""Shared test utilities: random tree construction and independent oracles.

The oracles here deliberately re-derive behaviour from scratch (different
arithmetic routes, exhaustive recursion) so unit and acceptance tests check
the engine against an independent computation rather than against itself.
"""

from __future__ import annotations

import math
import random

from treeseek.tree import SearchTree


def build_random_tree(rng: random.Random, max_nodes: int = 30, max_depth: int = 5) -> SearchTree:
    """Grow a tree through the public API the way a real search would."""
    tree = SearchTree("root question", max_depth=max_depth)
    n_children = rng.randint(0, max_nodes - 1)
    for i in range(n_children):
        open_parents = [
            n.id for n in tree.nodes if n.depth < max_depth
        ]
        parent = rng.choice(open_parents)
        tree.add_child(parent, f"subquery {i}")
    for node in tree.nodes:
        if node.children:
            node.expanded = True
    for node in tree.nodes:
        if not node.children and rng.random() < 0.15:
            node.unexpandable = True
    return tree


def backprop_oracle(sequence: list[tuple[int, float]], n_nodes: int, parents: dict[int, int | None]):
    """Recompute visits and values as plain sums over the reward log."""
    routed: dict[int, list[float]] = {i: [] for i in range(n_nodes)}
    for node_id, reward in sequence:
        nid: int | None = node_id
        while nid is not None:
            routed[nid].append(reward)
            nid = parents[nid]
    visits = {i: len(rs) for i, rs in routed.items()}
    values = {i: (sum(rs) / len(rs) if rs else 0.0) for i, rs in routed.items()}
    return visits, values


def uct_oracle(value: float, visits: int, parent_visits: int, w: float) -> float:
    if visits == 0:
        return float("inf")
    return value + w * (math.log(parent_visits) / visits) ** 0.5


def select_oracle(tree: SearchTree, w: float) -> int | None:
    """Exhaustive recursive re-derivation of the selection walk."""
    def is_open(nid: int) -> bool:
        n = tree.nodes[nid]
        return n.depth < tree.max_depth and not n.expanded and not n.unexpandable

    def subtree_open(nid: int) -> bool:
        return is_open(nid) or any(subtree_open(c) for c in tree.nodes[nid].children)

    if not subtree_open(0):
        return None
    nid = 0
    while not is_open(nid):
        node = tree.nodes[nid]
        candidates = [c for c in node.children if subtree_open(c)]
        best = candidates[0]
        best_score = uct_oracle(
            tree.nodes[best].value, tree.nodes[best].visits, node.visits, w
        )
        for c in candidates[1:]:
            score = uct_oracle(tree.nodes[c].value, tree.nodes[c].visits, node.visits, w)
            if score > best_score:
                best, best_score = c, score
        nid = best
    return nid
