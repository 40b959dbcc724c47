"""Random search trees and log-based recomputation shared by tests."""

from __future__ import annotations

import random
from fractions import Fraction

from revtraj.mcts import MctsConfig, SearchTree


def random_tree(rng: random.Random, env, task_id: str, max_nodes: int = 50, c_uct: float = 0.25):
    """A synthetic tree plus its plain-dict twin for the brute-force oracle.

    Leaves are one of: unexpanded (selectable), expanded but never visited
    (selectable), or expanded and visited with nothing left to do (dead).
    """
    tree = SearchTree(env, task_id, MctsConfig(c_uct=c_uct, max_depth=50))
    root = tree.root
    n = rng.randint(1, max_nodes)
    for _ in range(n - 1):
        parent = tree.nodes[rng.randrange(len(tree.nodes))]
        tree._add(parent, None, root.state, ())
    plain = {}
    for node in reversed(tree.nodes):  # children before parents
        if node.children:
            node.expanded = True
            own = rng.randint(0, 3)
            node.visits = sum(tree.nodes[c].visits for c in node.children) + own
            node.value_sum = sum((tree.nodes[c].value_sum for c in node.children), Fraction(0)) \
                + Fraction(rng.randint(0, 4 * own), 4)
            stop = False
        else:
            kind = rng.choice(["open", "unvisited", "dead", "dead"])
            node.expanded = kind != "open"
            node.visits = 0 if kind == "unvisited" else rng.randint(1, 6)
            if kind == "open" and rng.random() < 0.3:
                node.visits = 0
            node.value_sum = Fraction(rng.randint(0, 4 * node.visits), 4)
            stop = kind != "dead"
        plain[node.id] = {"children": list(node.children), "visits": node.visits,
                          "value": node.value_sum, "stop": stop}
    return tree, plain


def subtree_ids(tree, node_id):
    out, todo = [], [node_id]
    while todo:
        i = todo.pop()
        out.append(i)
        todo.extend(tree.nodes[i].children)
    return set(out)


def conservation_violations(result):
    """Nodes whose (N, W) differ from the simulation log restricted to their subtree."""
    tree = result.tree
    bad = []
    for node in tree.nodes:
        ids = subtree_ids(tree, node.id)
        rewards = [Fraction(r) for i, r in result.log if i in ids]
        if node.visits != len(rewards) or node.value_sum != sum(rewards, Fraction(0)):
            bad.append(node.id)
    return bad
