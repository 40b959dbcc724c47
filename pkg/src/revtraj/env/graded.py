"""Toy environment with graded terminal rewards.

A task is an ordered list of required actions. Progress only advances when the
next required action is issued, so the terminal reward is the fraction of the
subgoal list completed in order. ``submit`` ends the episode early.
"""

from __future__ import annotations

from dataclasses import dataclass

from revtraj import resources
from revtraj.env.base import EnvState, Environment, invalid
from revtraj.traj import Instruction

SUBMIT = "submit"


@dataclass(frozen=True)
class GradedPathSpec:
    goal: str
    subgoals: tuple[str, ...]
    distractors: frozenset[str]

    def __post_init__(self):
        if not self.subgoals:
            raise ValueError("a graded task needs at least one subgoal")
        if SUBMIT in self.subgoals or SUBMIT in self.distractors:
            raise ValueError(f"{SUBMIT!r} is reserved")
        if set(self.subgoals) & self.distractors:
            raise ValueError("distractors must not overlap subgoals")

    def score(self, progress: int) -> float:
        return progress / len(self.subgoals)


def load_graded_specs(doc: dict | None = None) -> dict[str, GradedPathSpec]:
    doc = doc or resources.read_json(resources.GRADED_TASKS)
    return {
        t["task_id"]: GradedPathSpec(t["goal"], tuple(t["subgoals"]), frozenset(t["distractors"]))
        for t in doc["tasks"]
    }


def longest_prefix_in_order(subgoals: tuple[str, ...], actions: list[str]) -> int:
    """Greedy count of leading subgoals appearing as a subsequence of ``actions``."""
    k = 0
    for a in actions:
        if k < len(subgoals) and a == subgoals[k]:
            k += 1
    return k


class GradedPathEnv(Environment):
    name = "graded"

    def __init__(self, specs: dict[str, GradedPathSpec] | None = None, max_rounds: int = 100):
        super().__init__(max_rounds)
        self.specs = specs if specs is not None else load_graded_specs()

    def tasks(self) -> list[str]:
        return list(self.specs)

    def instruction(self, task_id: str) -> Instruction:
        self._check_task(task_id)
        return Instruction(self.name, task_id, self.specs[task_id].goal)

    def _start(self, task_id: str):
        spec = self.specs[task_id]
        options = sorted(set(spec.subgoals) | spec.distractors) + [SUBMIT]
        obs = f"Goal: {spec.goal}\nAvailable actions: " + "; ".join(options)
        return 0, obs

    def _transition(self, task_id: str, progress: int, action: str):
        spec = self.specs[task_id]
        n = len(spec.subgoals)
        if action == SUBMIT:
            return progress, f"Submitted with {progress} of {n} steps complete.", True
        if progress < n and action == spec.subgoals[progress]:
            progress += 1
            return progress, f"Done: {action} ({progress}/{n}).", progress == n
        if action in spec.subgoals or action in spec.distractors:
            return progress, "Nothing happens.", False
        return progress, invalid(action), False

    def _score(self, task_id: str, progress: int) -> float:
        return self.specs[task_id].score(progress)

    def plan(self, state: EnvState) -> list[str]:
        if state.done:
            return []
        return list(self.specs[state.task_id].subgoals[state.data:])

    def distractors(self, task_id: str) -> list[str]:
        self._check_task(task_id)
        return sorted(self.specs[task_id].distractors) + [SUBMIT]
