"""Environment contract shared by the bundled toy environments and the HTTP client.

Environments are functional: ``EnvState`` values are immutable and ``step``
returns a new state, so snapshots are just the state wrapped with the owner id.
"""

from __future__ import annotations

import uuid
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Any, Sequence

from revtraj.traj import Instruction, Step, Trajectory

INVALID_PREFIX = "Invalid action:"
DEFAULT_MAX_ROUNDS = 100
REVISION_EVAL_ROUNDS = 50


class EnvError(Exception):
    pass


class UnknownTask(EnvError, KeyError):
    def __str__(self) -> str:
        return f"unknown task {self.args[0]!r}" if self.args else "unknown task"


class AlreadyTerminal(EnvError):
    pass


class InvalidSnapshot(EnvError):
    pass


@dataclass(frozen=True)
class EnvState:
    task_id: str
    step_count: int
    done: bool
    reward: float | None
    data: Any
    owner: str
    max_rounds: int


@dataclass(frozen=True)
class StepResult:
    observation: str
    reward: float | None
    done: bool

    def __post_init__(self):
        if (self.reward is not None) != self.done:
            raise ValueError("reward is reported exactly when the episode is done")
        if not self.observation:
            raise ValueError("observation must be non-empty")


@dataclass(frozen=True)
class Snapshot:
    owner: str
    state: EnvState


def invalid(action: str) -> str:
    return f"{INVALID_PREFIX} {action}"


class Environment(ABC):
    """Deterministic POMDP environment.

    Subclasses implement ``_start``, ``_transition`` and ``_score``; the base
    class handles round limits, termination and snapshots.
    """

    name: str = "env"

    def __init__(self, max_rounds: int = DEFAULT_MAX_ROUNDS):
        if max_rounds < 1:
            raise ValueError("max_rounds must be positive")
        self.max_rounds = max_rounds
        self.uid = uuid.uuid4().hex

    # -- subclass hooks -------------------------------------------------
    @abstractmethod
    def tasks(self) -> list[str]: ...

    @abstractmethod
    def instruction(self, task_id: str) -> Instruction: ...

    @abstractmethod
    def _start(self, task_id: str) -> tuple[Any, str]:
        """Initial payload and first observation."""

    @abstractmethod
    def _transition(self, task_id: str, data: Any, action: str) -> tuple[Any, str, bool]:
        """Next payload, observation and whether the episode ended by itself."""

    @abstractmethod
    def _score(self, task_id: str, data: Any) -> float: ...

    def plan(self, state: EnvState) -> list[str]:
        """Optimal remaining actions from ``state`` (scripted oracle support)."""
        raise NotImplementedError(f"{type(self).__name__} has no oracle plan")

    def distractors(self, task_id: str) -> list[str]:
        raise NotImplementedError(f"{type(self).__name__} has no distractor set")

    def action_space(self, task_id: str) -> list[str]:
        start = self.reset(task_id)[1]
        return list(dict.fromkeys(self.plan(start) + self.distractors(task_id)))

    # -- contract -------------------------------------------------------
    def with_max_rounds(self, max_rounds: int) -> "Environment":
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.max_rounds = max_rounds
        clone.uid = uuid.uuid4().hex
        return clone

    def _check_task(self, task_id: str) -> None:
        if task_id not in self.tasks():
            raise UnknownTask(task_id)

    def reset(self, task_id: str) -> tuple[Instruction, EnvState, str]:
        self._check_task(task_id)
        data, obs = self._start(task_id)
        state = EnvState(task_id, 0, False, None, data, self.uid, self.max_rounds)
        return self.instruction(task_id), state, obs

    def step(self, state: EnvState, action: str) -> tuple[EnvState, StepResult]:
        self._own(state)
        if state.done:
            raise AlreadyTerminal(f"task {state.task_id} already finished")
        data, obs, finished = self._transition(state.task_id, state.data, action.strip())
        count = state.step_count + 1
        done = finished or count >= state.max_rounds
        reward = self._score(state.task_id, data) if done else None
        new = replace(state, step_count=count, done=done, reward=reward, data=data)
        return new, StepResult(obs, reward, done)

    def terminate(self, state: EnvState) -> EnvState:
        """Force the episode to end and apply the environment's terminal ruling."""
        self._own(state)
        if state.done:
            return state
        return replace(state, done=True, reward=self._score(state.task_id, state.data))

    def snapshot(self, state: EnvState) -> Snapshot:
        self._own(state)
        return Snapshot(self.uid, state)

    def restore(self, token: Snapshot) -> EnvState:
        if not isinstance(token, Snapshot) or token.owner != self.uid:
            raise InvalidSnapshot("snapshot does not belong to this environment instance")
        return token.state

    def _own(self, state: EnvState) -> None:
        if state.owner != self.uid:
            raise InvalidSnapshot("state belongs to another environment instance")

    def replay_state(self, task_id: str, actions: Sequence[str]) -> tuple[Trajectory, EnvState]:
        """Force ``actions`` in order; stops early if the episode ends."""
        instruction, state, first_obs = self.reset(task_id)
        steps = []
        for action in actions:
            if state.done:
                break
            state, result = self.step(state, action)
            steps.append(Step(action=action, observation=result.observation))
        traj = Trajectory(instruction, tuple(steps), state.reward, state.done,
                          initial_observation=first_obs)
        return traj, state

    def replay(self, task_id: str, actions: Sequence[str], finalize: bool = True) -> Trajectory:
        traj, state = self.replay_state(task_id, actions)
        if finalize and not state.done:
            state = self.terminate(state)
            traj = Trajectory(traj.instruction, traj.steps, state.reward, True,
                              initial_observation=traj.initial_observation)
        return traj
