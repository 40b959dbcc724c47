"""Evaluation and trajectory analysis.

* ``evaluate``: greedy rollout per task, average final reward and success rate.
* ``revision_eval``: truncate failed trajectories at a random step, replay the
  prefix and let the policy continue.
* ``revision_length``: mean transition point of revision trajectories.
* ``loop_profile``: for each block length L, the longest run of consecutive
  repetitions of any L-action block, per trajectory, averaged over trajectories.
"""

from __future__ import annotations

import logging
import random
from dataclasses import asdict, dataclass, field
from statistics import fmean
from typing import Sequence

from revtraj.env import REVISION_EVAL_ROUNDS, EnvError, Environment
from revtraj.policy import EVAL_TEMPERATURE, Policy, PolicyUnavailable, rollout
from revtraj.traj import RevisionTrajectory, Trajectory

log = logging.getLogger(__name__)


@dataclass
class TaskScore:
    task_id: str
    reward: float
    steps: int
    flag: str | None = None  # "failed" (scored 0) or an exclusion reason
    truncated_at: int | None = None


@dataclass
class EvalReport:
    env: str
    mode: str
    max_rounds: int
    tasks: list[TaskScore] = field(default_factory=list)
    excluded: list[TaskScore] = field(default_factory=list)

    @property
    def average_reward(self) -> float:
        return fmean(t.reward for t in self.tasks) if self.tasks else 0.0

    @property
    def success_rate(self) -> float:
        return sum(t.reward == 1 for t in self.tasks) / len(self.tasks) if self.tasks else 0.0

    def to_dict(self) -> dict:
        return {
            "env": self.env,
            "mode": self.mode,
            "max_rounds": self.max_rounds,
            "average_reward": self.average_reward,
            "success_rate": self.success_rate,
            "tasks": [asdict(t) for t in self.tasks],
            "excluded": [asdict(t) for t in self.excluded],
        }

    def table(self) -> str:
        lines = [f"{self.env} [{self.mode}, max_rounds={self.max_rounds}]",
                 f"{'task':<24}{'reward':>8}{'steps':>7}  flag"]
        for t in self.tasks + self.excluded:
            reward = "-" if t in self.excluded else f"{t.reward:.3f}"
            lines.append(f"{t.task_id:<24}{reward:>8}{t.steps:>7}  {t.flag or ''}")
        lines.append(f"average reward {self.average_reward:.4f}  success rate {self.success_rate:.4f}"
                     f"  ({len(self.tasks)} scored, {len(self.excluded)} excluded)")
        return "\n".join(lines)


def evaluate(policy: Policy, env: Environment, tasks: Sequence[str], max_rounds: int = 100
             ) -> tuple[EvalReport, list[Trajectory]]:
    """Greedy (temperature 0, one proposal) episode per task.

    Returns the report and the finished trajectories (useful as failure pools).
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    env = env.with_max_rounds(max_rounds)
    report = EvalReport(env.name, "test", max_rounds)
    trajectories = []
    for task in tasks:
        instruction, state, obs = env.reset(task)
        try:
            res = rollout(policy, env, instruction, state, (), max_rounds, EVAL_TEMPERATURE, obs)
        except (PolicyUnavailable, EnvError) as exc:
            log.warning("evaluation of %s failed: %s", task, exc)
            report.tasks.append(TaskScore(task, 0.0, 0, "failed"))
            continue
        report.tasks.append(TaskScore(task, res.reward, len(res.steps)))
        trajectories.append(Trajectory(instruction, tuple(res.steps), res.reward, True,
                                       initial_observation=obs))
    return report, trajectories


def revision_eval(
    policy: Policy,
    env: Environment,
    failures: Sequence[Trajectory],
    rng: random.Random,
    max_rounds: int = REVISION_EVAL_ROUNDS,
) -> EvalReport:
    """Truncate each failure at a uniform step in [1, len-1], replay, resume.

    ``max_rounds`` bounds the rounds taken after the truncation point. A replay
    whose observations differ from the recorded ones marks the task
    non-deterministic and excludes it from scoring.
    """
    report = EvalReport(env.name, "revision_eval", max_rounds)
    for i, failure in enumerate(failures):
        label = f"{failure.instruction.task_id}#{i}"
        if failure.reward != 0:
            raise ValueError(f"{label}: revision evaluation expects reward-0 failures")
        if len(failure.steps) < 2:
            report.excluded.append(TaskScore(label, 0.0, len(failure.steps), "too_short"))
            continue
        t = rng.randint(1, len(failure.steps) - 1)
        prefix = failure.steps[:t]
        run_env = env.with_max_rounds(t + max_rounds)
        replayed, state = run_env.replay_state(failure.instruction.task_id, [s.action for s in prefix])
        if tuple(s.observation for s in replayed.steps) != tuple(s.observation for s in prefix):
            report.excluded.append(TaskScore(label, 0.0, t, "NonDeterministicEnv", t))
            continue
        if state.done:
            report.excluded.append(TaskScore(label, 0.0, t, "NonDeterministicEnv", t))
            continue
        try:
            res = rollout(policy, run_env, failure.instruction, state, prefix, max_rounds,
                          EVAL_TEMPERATURE, failure.initial_observation)
        except (PolicyUnavailable, EnvError) as exc:
            log.warning("revision eval of %s failed: %s", label, exc)
            report.tasks.append(TaskScore(label, 0.0, t, "failed", t))
            continue
        report.tasks.append(TaskScore(label, res.reward, t + len(res.steps), None, t))
    return report


def revision_length(revisions: Sequence[RevisionTrajectory]) -> float | None:
    """Mean transition point (actions up to and including the first flagged error)."""
    if not revisions:
        return None
    return fmean(r.transition for r in revisions)


def max_repetition(actions: Sequence[str], block: int) -> int | None:
    """Longest run of back-to-back copies of any ``block``-length action window.

    ``None`` when the trajectory is shorter than one block.
    """
    n = len(actions)
    if n < block:
        return None
    # runs[i]: copies of actions[i:i+block] starting at i
    runs = [1] * (n - block + 1)
    best = 1
    for i in range(n - 2 * block, -1, -1):
        if actions[i:i + block] == actions[i + block:i + 2 * block]:
            runs[i] = runs[i + block] + 1
            best = max(best, runs[i])
    return best


@dataclass
class LoopProfile:
    counts: dict[int, float | None]
    trajectories: dict[int, int]

    def to_dict(self) -> dict:
        return {"counts": {str(k): v for k, v in self.counts.items()},
                "trajectories": {str(k): v for k, v in self.trajectories.items()}}

    def table(self) -> str:
        lines = [f"{'L':>3}  {'avg max repeats':>16}  {'trajectories':>12}"]
        for L, v in self.counts.items():
            shown = "-" if v is None else f"{v:.4f}"
            lines.append(f"{L:>3}  {shown:>16}  {self.trajectories[L]:>12}")
        return "\n".join(lines)


def loop_profile(trajectories: Sequence[Trajectory | Sequence[str]], max_len: int = 5) -> LoopProfile:
    """Average per-trajectory maximal repetition count for block lengths 1..max_len.

    Trajectories shorter than L do not contribute to L; with no contributors the
    entry is ``None``. Actions are compared as exact strings.
    """
    if not trajectories:
        raise ValueError("loop_profile needs at least one trajectory")
    seqs = [t.actions if isinstance(t, Trajectory) else tuple(t) for t in trajectories]
    counts, used = {}, {}
    for L in range(1, max_len + 1):
        vals = [v for v in (max_repetition(s, L) for s in seqs) if v is not None]
        counts[L] = fmean(vals) if vals else None
        used[L] = len(vals)
    return LoopProfile(counts, used)
