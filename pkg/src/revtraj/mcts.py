"""Monte Carlo Tree Search over agent trajectories.

Each iteration selects a node by UCT, expands it with ``expand_width`` policy
proposals, runs ``k_rollouts`` rollouts from the first new child and
backpropagates the terminal rewards. Every root-to-terminal path seen along the
way is harvested as a trajectory for pairing.

Value sums are kept as exact fractions so that Q can be checked exactly against
rewards recomputed from the simulation log.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

from revtraj.env import EnvError, EnvState, Environment, Snapshot
from revtraj.policy import Policy, PolicyContext, PolicyUnavailable, rollout
from revtraj.traj import Instruction, Step, Trajectory

log = logging.getLogger(__name__)


class SearchExhausted(Exception):
    pass


@dataclass(frozen=True)
class MctsConfig:
    k_rollouts: int = 8
    max_depth: int = 20
    c_uct: float = 0.25
    expand_width: int = 4
    simulations: int = 100
    seed: int = 0
    temperature: float = 1.0

    def __post_init__(self):
        for name in ("k_rollouts", "max_depth", "expand_width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.simulations < 0:
            raise ValueError("simulations must be >= 0")
        if self.c_uct < 0:
            raise ValueError("c_uct must be >= 0")


@dataclass
class SearchNode:
    id: int
    parent: int | None
    step: Step | None
    depth: int
    token: Snapshot
    steps: tuple[Step, ...]
    children: list[int] = field(default_factory=list)
    visits: int = 0
    value_sum: Fraction = Fraction(0)
    own_simulations: int = 0
    expanded: bool = False
    frontier: bool = False

    @property
    def state(self) -> EnvState:
        return self.token.state

    @property
    def terminal(self) -> bool:
        return self.token.state.done

    @property
    def q(self) -> float:
        return float(self.value_sum / self.visits) if self.visits else 0.0

    # short names matching the tree dump keys
    N = property(lambda self: self.visits)
    W = property(lambda self: self.value_sum)


@dataclass(frozen=True)
class HarvestRecord:
    trajectory: Trajectory
    leaf_node_path: tuple[int, ...]
    origin: str  # "rollout" | "terminal_path"


def uct_score(q: float, visits: int, parent_visits: int, c_uct: float) -> float:
    """Q + c * sqrt(ln N_p / N); unvisited nodes score +inf."""
    if visits == 0:
        return math.inf
    return q + c_uct * math.sqrt(math.log(parent_visits) / visits)


class SearchTree:
    def __init__(self, env: Environment, task_id: str, cfg: MctsConfig):
        self.env = env
        self.cfg = cfg
        self.task_id = task_id
        instruction, state, obs = env.reset(task_id)
        self.instruction: Instruction = instruction
        self.initial_observation = obs
        self.nodes: list[SearchNode] = []
        self._add(None, None, state, ())

    @property
    def root(self) -> SearchNode:
        return self.nodes[0]

    def _add(self, parent: SearchNode | None, step: Step | None, state: EnvState,
             steps: tuple[Step, ...]) -> SearchNode:
        node = SearchNode(
            id=len(self.nodes),
            parent=parent.id if parent else None,
            step=step,
            depth=parent.depth + 1 if parent else 0,
            token=self.env.snapshot(state),
            steps=steps,
        )
        self.nodes.append(node)
        if parent:
            parent.children.append(node.id)
        return node

    def path(self, node: SearchNode) -> tuple[int, ...]:
        ids = []
        cur: SearchNode | None = node
        while cur is not None:
            ids.append(cur.id)
            cur = self.nodes[cur.parent] if cur.parent is not None else None
        return tuple(reversed(ids))

    def expandable(self, node: SearchNode) -> bool:
        return not node.terminal and not node.expanded and node.depth < self.cfg.max_depth

    def awaiting_visit(self, node: SearchNode) -> bool:
        """Leaf that cannot be expanded but has never been simulated."""
        return node.visits == 0 and not node.children

    def exhausted(self, node: SearchNode) -> bool:
        if self.expandable(node) or self.awaiting_visit(node):
            return False
        return all(self.exhausted(self.nodes[c]) for c in node.children)

    def score(self, node: SearchNode) -> float:
        parent = self.nodes[node.parent]
        return uct_score(node.q, node.visits, parent.visits, self.cfg.c_uct)

    def trajectory(self, node: SearchNode, suffix: tuple[Step, ...] = (),
                   reward: float | None = None) -> Trajectory:
        return Trajectory(self.instruction, node.steps + suffix, reward, reward is not None,
                          initial_observation=self.initial_observation)

    def to_dict(self, log_entries: list[tuple[int, float]] | None = None) -> dict[str, Any]:
        nodes = []
        for n in self.nodes:
            nodes.append({
                "id": n.id,
                "parent": n.parent,
                "action": n.step.action if n.step else None,
                "observation": n.step.observation if n.step else None,
                "depth": n.depth,
                "N": n.visits,
                "W": float(n.value_sum),
                "terminal": n.terminal,
                "reward": n.state.reward,
            })
        out: dict[str, Any] = {
            "env": self.instruction.env_name,
            "task_id": self.task_id,
            "nodes": nodes,
        }
        if log_entries is not None:
            out["simulations"] = [{"node": i, "reward": r} for i, r in log_entries]
        return out


def select(tree: SearchTree) -> SearchNode:
    """Descend by UCT argmax (ties to the earliest child) to a node worth working on."""
    node = tree.root
    while True:
        if tree.expandable(node) or tree.awaiting_visit(node):
            return node
        best, best_score = None, -math.inf
        for cid in node.children:
            child = tree.nodes[cid]
            if tree.exhausted(child):
                continue
            s = tree.score(child)
            if best is None or s > best_score:
                best, best_score = child, s
        if best is None:
            raise SearchExhausted(f"no expandable node left for task {tree.task_id}")
        node = best


def expand(tree: SearchTree, node: SearchNode, policy: Policy) -> list[SearchNode]:
    if node.depth >= tree.cfg.max_depth and not node.terminal:
        node.frontier = True
        node.expanded = True
        return []
    if not tree.expandable(node):
        return []
    state = tree.env.restore(node.token)
    ctx = PolicyContext(tree.instruction, node.steps, tree.cfg.temperature, tree.cfg.expand_width,
                        tree.initial_observation, state)
    proposals = policy.propose(ctx)
    node.expanded = True
    children, seen = [], set()
    for p in proposals:
        if p.action in seen:
            continue
        seen.add(p.action)
        new_state, result = tree.env.step(state, p.action)
        step = Step(p.action, result.observation, p.thought)
        children.append(tree._add(node, step, new_state, node.steps + (step,)))
    return children


@dataclass
class SimulationResult:
    rewards: list[float]
    records: list[HarvestRecord]
    failures: int = 0


def simulate(tree: SearchTree, node: SearchNode, policy: Policy,
             cfg: MctsConfig | None = None) -> SimulationResult:
    cfg = cfg or tree.cfg
    path = tree.path(node)
    if node.terminal:
        reward = node.state.reward
        record = HarvestRecord(tree.trajectory(node, reward=reward), path, "terminal_path")
        return SimulationResult([reward] * cfg.k_rollouts, [record])
    rewards, records, failures = [], [], 0
    for _ in range(cfg.k_rollouts):
        try:
            res = rollout(policy, tree.env, tree.instruction, tree.env.restore(node.token),
                          node.steps, cfg.max_depth - node.depth, cfg.temperature,
                          tree.initial_observation)
        except (PolicyUnavailable, EnvError) as exc:
            failures += 1
            log.warning("rollout from node %d of %s failed: %s", node.id, tree.task_id, exc)
            continue
        rewards.append(res.reward)
        records.append(HarvestRecord(tree.trajectory(node, tuple(res.steps), res.reward),
                                     path, "rollout"))
    return SimulationResult(rewards, records, failures)


def backpropagate(tree: SearchTree, node: SearchNode, rewards: list[float]) -> None:
    total = sum((Fraction(r) for r in rewards), Fraction(0))
    node.own_simulations += len(rewards)
    for nid in tree.path(node):
        n = tree.nodes[nid]
        n.visits += len(rewards)
        n.value_sum += total


@dataclass
class SearchResult:
    tree: SearchTree
    harvest: list[HarvestRecord]
    log: list[tuple[int, float]]
    iterations: int
    raw_harvest: int
    rollout_failures: int = 0
    exhausted: bool = False

    @property
    def trajectories(self) -> list[Trajectory]:
        return [r.trajectory for r in self.harvest]


def run_search(env: Environment, task_id: str, policy: Policy, cfg: MctsConfig,
               rollout_policy: Policy | None = None) -> SearchResult:
    tree = SearchTree(env, task_id, cfg)
    rollout_policy = rollout_policy or policy
    harvest: list[HarvestRecord] = []
    seen: set[tuple[str, ...]] = set()
    sim_log: list[tuple[int, float]] = []
    raw = failures = iterations = 0
    exhausted = False

    def keep(record: HarvestRecord) -> None:
        nonlocal raw
        raw += 1
        key = record.trajectory.actions
        if key not in seen:
            seen.add(key)
            harvest.append(record)

    for _ in range(cfg.simulations):
        try:
            node = select(tree)
        except SearchExhausted:
            exhausted = True
            break
        target = node
        if tree.expandable(node):
            children = expand(tree, node, policy)
            for child in children:
                if child.terminal:
                    keep(HarvestRecord(tree.trajectory(child, reward=child.state.reward),
                                       tree.path(child), "terminal_path"))
            if children:
                target = children[0]
        result = simulate(tree, target, rollout_policy, cfg)
        for rec in result.records:
            keep(rec)
        failures += result.failures
        if result.rewards:
            backpropagate(tree, target, result.rewards)
            sim_log.extend((target.id, r) for r in result.rewards)
        iterations += 1
    return SearchResult(tree, harvest, sim_log, iterations, raw, failures, exhausted)
