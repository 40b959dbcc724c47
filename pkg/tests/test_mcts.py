import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_select, uct_highprec
from revtraj.env import CraftEnv
from revtraj.mcts import (
    MctsConfig,
    SearchExhausted,
    SearchTree,
    backpropagate,
    expand,
    run_search,
    select,
    simulate,
    uct_score,
)
from revtraj.policy import ScriptedOracle
from trees import conservation_violations, random_tree


def test_uct_examples():
    assert uct_score(0.0, 1, 1, 0.25) == 0.0
    assert uct_score(0.37, 3, 40, 0.0) == 0.37
    assert uct_score(0.5, 0, 10, 0.25) == math.inf
    # high-precision oracle value for Q=0.5, N=2, N_p=8, c=0.25
    assert uct_score(0.5, 2, 8, 0.25) == pytest.approx(0.7549167475422022, rel=1e-12)


@given(st.floats(0, 1), st.integers(1, 10_000), st.integers(1, 10_000), st.floats(0, 4))
def test_uct_matches_high_precision(q, n, extra, c):
    np_ = n + extra - 1
    got = uct_score(q, n, np_, c)
    want = float(uct_highprec(q, n, np_, c))
    assert got == pytest.approx(want, rel=1e-12, abs=1e-300)


def test_fresh_root_selected(craft):
    tree = SearchTree(craft, "plank", MctsConfig())
    assert select(tree) is tree.root


def test_select_prefers_higher_score(craft):
    tree = SearchTree(craft, "plank", MctsConfig())
    root = tree.root
    root.expanded = True
    a = tree._add(root, None, root.state, ())
    b = tree._add(root, None, root.state, ())
    from fractions import Fraction
    for node, w in ((a, Fraction(9, 10)), (b, Fraction(3, 10))):
        node.visits, node.value_sum = 1, w
    root.visits = 2
    assert select(tree) is a


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_select_matches_brute_force(seed):
    rng = random.Random(seed)
    tree, plain = random_tree(rng, CraftEnv(), "torch")
    want = brute_select(plain, tree.cfg.c_uct)
    if want is None:
        with pytest.raises(SearchExhausted):
            select(tree)
    else:
        assert list(tree.path(select(tree))) == want


def test_expand_reproducible(craft):
    cfg = MctsConfig()

    def children():
        tree = SearchTree(craft, "bookshelf", cfg)
        kids = expand(tree, tree.root, ScriptedOracle(craft, 0.5, 11))
        return [(k.step.action, k.step.observation) for k in kids]

    first = children()
    assert first == children()
    assert 1 <= len(first) <= 4 and len(set(first)) == len(first)


def test_expand_at_max_depth_marks_frontier(craft):
    tree = SearchTree(craft, "plank", MctsConfig(max_depth=1))
    [child] = expand(tree, tree.root, ScriptedOracle(craft, 0.0))[:1] or [None]
    assert child is not None
    assert expand(tree, child, ScriptedOracle(craft, 0.0)) == []
    assert child.frontier


def test_expand_duplicates_give_fewer_children(craft):
    # epsilon 0 always proposes the plan head: duplicates survive retries
    tree = SearchTree(craft, "plank", MctsConfig())
    kids = expand(tree, tree.root, ScriptedOracle(craft, 0.0))
    assert len(kids) == 1


def test_simulate_terminal_node(craft):
    tree = SearchTree(craft, "plank", MctsConfig(k_rollouts=5))
    node = tree.root
    for a in ("get 1 wood", "craft 1 plank"):
        state, _ = craft.step(node.state, a)
        node = tree._add(node, None, state, ())
    res = simulate(tree, node, ScriptedOracle(craft, 0.0))
    assert res.rewards == [1.0] * 5
    assert [r.origin for r in res.records] == ["terminal_path"]


def test_simulate_oracle_all_success(craft):
    tree = SearchTree(craft, "furnace", MctsConfig(k_rollouts=8))
    res = simulate(tree, tree.root, ScriptedOracle(craft, 0.0))
    assert res.rewards == [1.0] * 8


def test_simulate_reproducible(craft):
    def rewards():
        tree = SearchTree(craft, "iron_pickaxe", MctsConfig(k_rollouts=8))
        return sorted(simulate(tree, tree.root, ScriptedOracle(craft, 0.5, 4)).rewards)
    assert rewards() == rewards()


def test_backpropagate_arithmetic(craft):
    from fractions import Fraction
    tree = SearchTree(craft, "plank", MctsConfig())
    leaf = tree._add(tree.root, None, tree.root.state, ())
    tree.root.visits, tree.root.value_sum = 2, Fraction(1)
    backpropagate(tree, leaf, [1.0, 0.0])
    assert (tree.root.visits, tree.root.value_sum, tree.root.q) == (4, 2, 0.5)
    assert (leaf.visits, leaf.q) == (2, 0.5)


def test_run_search_oracle_budget_one(craft):
    res = run_search(craft, "plank", ScriptedOracle(craft, 0.0), MctsConfig(simulations=1))
    assert any(t.reward == 1.0 for t in res.trajectories)


def test_run_search_budget_zero(craft):
    res = run_search(craft, "plank", ScriptedOracle(craft, 0.0), MctsConfig(simulations=0))
    assert res.harvest == [] and res.tree.root.visits == 0


def test_run_search_deterministic(craft):
    cfg = MctsConfig(simulations=50)
    a = run_search(craft, "bookshelf", ScriptedOracle(craft, 0.3, 9), cfg)
    b = run_search(craft, "bookshelf", ScriptedOracle(craft, 0.3, 9), cfg)
    assert [t.to_dict() for t in a.trajectories] == [t.to_dict() for t in b.trajectories]
    assert a.tree.to_dict(a.log) == b.tree.to_dict(b.log)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["torch", "iron_pickaxe", "book"]),
       st.sampled_from([0.1, 0.4, 0.8]))
def test_search_statistics_conserved(seed, task, eps):
    env = CraftEnv()
    res = run_search(env, task, ScriptedOracle(env, eps, seed), MctsConfig(simulations=30))
    assert res.tree.root.visits == len(res.log)
    assert conservation_violations(res) == []


def test_search_exhausts_small_tree(graded):
    # depth 1: only root expansion is possible, then everything is spent
    cfg = MctsConfig(simulations=50, max_depth=1, expand_width=2)
    res = run_search(graded, "garden-water", ScriptedOracle(graded, 0.5, 1), cfg)
    assert res.exhausted and res.iterations < 50


def test_harvest_is_deduplicated(craft):
    res = run_search(craft, "torch", ScriptedOracle(craft, 0.3, 2), MctsConfig(simulations=40))
    keys = [t.actions for t in res.trajectories]
    assert len(keys) == len(set(keys))
    assert res.raw_harvest >= len(keys)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.integers(1, 30), st.integers(1, 30))
def test_harvest_monotone_in_budget(seed, b, extra):
    env = CraftEnv()
    small = run_search(env, "book", ScriptedOracle(env, 0.4, seed), MctsConfig(simulations=b))
    big = run_search(env, "book", ScriptedOracle(env, 0.4, seed), MctsConfig(simulations=b + extra))
    assert {t.actions for t in small.trajectories} <= {t.actions for t in big.trajectories}
