"""Independent reference implementations used as test oracles.

These deliberately avoid the package's own helpers: brute force, high precision
arithmetic or a different algorithm for the same quantity.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import mpmath

mpmath.mp.dps = 50


def uct_highprec(q, visits, parent_visits, c):
    if visits == 0:
        return mpmath.inf
    q = mpmath.mpf(q) if not isinstance(q, Fraction) else mpmath.mpf(q.numerator) / q.denominator
    return q + mpmath.mpf(c) * mpmath.sqrt(mpmath.log(parent_visits) / visits)


def brute_select(nodes, c):
    """Descend from node 0 over a plain dict tree.

    ``nodes[i]`` has keys children, visits, value (Fraction), stop (bool: the
    node is itself a valid selection), dead (bool: leaf with nothing to do).
    Returns the path of ids, or None when nothing is selectable.
    """

    def alive(i):
        n = nodes[i]
        if n["stop"]:
            return True
        return any(alive(c) for c in n["children"])

    path = [0]
    cur = 0
    while not nodes[cur]["stop"]:
        scored = []
        for pos, ch in enumerate(nodes[cur]["children"]):
            if not alive(ch):
                continue
            n = nodes[ch]
            q = n["value"] / n["visits"] if n["visits"] else Fraction(0)
            scored.append((uct_highprec(q, n["visits"], nodes[cur]["visits"], c), pos, ch))
        if not scored:
            return None
        top = max(s for s, _, _ in scored)
        # ties: lowest child position
        cur = min((pos, ch) for s, pos, ch in scored if s == top)[1]
        path.append(cur)
    return path


def filter_brute(rb, rg, beta, alpha):
    """Three strict inequalities; alpha == 1 is read as the optimal rule r_g == 1."""
    if alpha >= 1:
        return rb < beta and beta < rg and rg == 1
    return rb < beta and beta < rg and alpha < rg


def repetition_brute(actions, L):
    """Maximal count of back-to-back copies of any length-L block (quadratic scan)."""
    n = len(actions)
    if n < L:
        return None
    best = 1
    for i in range(n - L + 1):
        block = list(actions[i:i + L])
        k = 1
        while list(actions[i + k * L:i + (k + 1) * L]) == block:
            k += 1
        best = max(best, k)
    return best


def ordered_subgoals_brute(subgoals, actions):
    """Largest k such that subgoals[:k] appear in ``actions`` as a subsequence.

    Tries every k from the top and checks by exhaustive index search.
    """
    for k in range(len(subgoals), -1, -1):
        target = list(subgoals[:k])
        for idx in itertools.combinations(range(len(actions)), k):
            if [actions[i] for i in idx] == target:
                return k
    return 0


def shared_prefix_brute(a_steps, b_steps):
    """Count of leading positions where action and observation both agree."""
    for t in range(min(len(a_steps), len(b_steps)) + 1):
        if t == min(len(a_steps), len(b_steps)):
            return t
        x, y = a_steps[t], b_steps[t]
        if (x.action, x.observation) != (y.action, y.observation):
            return t
    return 0
