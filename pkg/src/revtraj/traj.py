"""Trajectory data model, revision splicing and the reward filter.

All objects here are frozen dataclasses; lists are stored as tuples so values
can be shared freely between workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Union

HUMAN_ACK = "OK."


class TrajectoryError(ValueError):
    pass


class InvalidPair(TrajectoryError):
    pass


class NotTerminal(TrajectoryError):
    pass


class TransitionBeforeDivergence(TrajectoryError):
    pass


class TransitionOutOfRange(TrajectoryError):
    pass


class Kind(str, Enum):
    INITIAL = "initial"
    BAD = "bad"
    GOOD = "good"
    OPTIMAL = "optimal"
    UNKNOWN = "unknown"


class Source(str, Enum):
    MODEL_GUIDED = "model_guided"
    DIRECT = "direct"


@dataclass(frozen=True)
class Instruction:
    env_name: str
    task_id: str
    text: str

    def __post_init__(self):
        if not self.text:
            raise TrajectoryError("instruction text must be non-empty")

    def to_dict(self) -> dict:
        return {"env": self.env_name, "task_id": self.task_id, "text": self.text}

    @classmethod
    def from_dict(cls, d: dict) -> "Instruction":
        return cls(env_name=d["env"], task_id=d["task_id"], text=d["text"])


@dataclass(frozen=True)
class Step:
    action: str
    observation: str
    thought: str | None = None

    def __post_init__(self):
        if not self.action:
            raise TrajectoryError("step action must be non-empty")
        if self.observation is None:
            raise TrajectoryError("executed steps need an observation")

    def assistant_text(self) -> str:
        """The step as an agent turn: ``Thought: ...`` line (if any) then ``Action: ...``."""
        if self.thought:
            return f"Thought: {self.thought}\nAction: {self.action}"
        return f"Action: {self.action}"

    def same_transition(self, other: "Step") -> bool:
        return self.action == other.action and self.observation == other.observation

    def to_dict(self) -> dict:
        d: dict[str, Any] = {}
        if self.thought is not None:
            d["thought"] = self.thought
        d["action"] = self.action
        d["observation"] = self.observation
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Step":
        return cls(action=d["action"], observation=d["observation"], thought=d.get("thought"))


@dataclass(frozen=True)
class Trajectory:
    instruction: Instruction
    steps: tuple[Step, ...] = ()
    reward: float | None = None
    terminal: bool = False
    kind: Kind = Kind.UNKNOWN
    initial_observation: str = ""

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(self, "kind", Kind(self.kind))
        if (self.reward is not None) != self.terminal:
            raise TrajectoryError("reward must be set exactly when the trajectory is terminal")
        if self.reward is not None and not 0 <= self.reward <= 1:
            raise TrajectoryError(f"reward {self.reward} outside [0, 1]")
        if self.kind is Kind.OPTIMAL and self.reward != 1:
            raise TrajectoryError("optimal trajectories must have reward 1")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def actions(self) -> tuple[str, ...]:
        return tuple(s.action for s in self.steps)

    def with_kind(self, kind: Kind) -> "Trajectory":
        return Trajectory(self.instruction, self.steps, self.reward, self.terminal, kind, self.initial_observation)

    def to_dict(self) -> dict:
        d = {
            "instruction": self.instruction.to_dict(),
            "steps": [s.to_dict() for s in self.steps],
            "reward": self.reward,
            "terminal": self.terminal,
            "kind": self.kind.value,
        }
        if self.initial_observation:
            d["initial_observation"] = self.initial_observation
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(
            instruction=Instruction.from_dict(d["instruction"]),
            steps=tuple(Step.from_dict(s) for s in d["steps"]),
            reward=d["reward"],
            terminal=d["terminal"],
            kind=Kind(d.get("kind", "unknown")),
            initial_observation=d.get("initial_observation", ""),
        )


def shared_prefix(a: Trajectory, b: Trajectory) -> int:
    """Number of leading steps on which ``a`` and ``b`` agree (action and observation)."""
    if a.instruction != b.instruction:
        raise InvalidPair("trajectories answer different instructions")
    t = 0
    for x, y in zip(a.steps, b.steps):
        if not x.same_transition(y):
            break
        t += 1
    return t


@dataclass(frozen=True)
class TrajectoryPair:
    bad: Trajectory
    good: Trajectory
    divergence: int

    def __post_init__(self):
        if not (self.bad.terminal and self.good.terminal):
            raise NotTerminal("both trajectories of a pair must be terminal")
        if shared_prefix(self.bad, self.good) != self.divergence:
            raise InvalidPair("divergence does not match the shared prefix")

    @classmethod
    def of(cls, bad: Trajectory, good: Trajectory) -> "TrajectoryPair":
        return cls(bad=bad, good=good, divergence=shared_prefix(bad, good))


@dataclass(frozen=True)
class FilterConfig:
    beta: float = 0.2
    alpha: float = 0.5

    def __post_init__(self):
        if not (0 < self.beta < self.alpha <= 1):
            raise ValueError(f"need 0 < beta < alpha <= 1, got beta={self.beta} alpha={self.alpha}")


@dataclass(frozen=True)
class FilterResult:
    accepted: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.accepted


ACCEPT = FilterResult(True)


def good_clears_alpha(good_reward: float, alpha: float) -> bool:
    # alpha == 1 admits only optimal (reward == 1) trajectories: the upper bound
    # r <= 1 closes the interval instead of leaving it empty.
    if alpha >= 1:
        return good_reward == 1
    return alpha < good_reward


def classify_pair(pair: TrajectoryPair, cfg: FilterConfig) -> FilterResult:
    rb, rg = pair.bad.reward, pair.good.reward
    if rb is None or rg is None:
        raise NotTerminal("pair trajectories need rewards")
    if not rb < cfg.beta:
        return FilterResult(False, "bad_above_beta")
    if not cfg.beta < rg:
        return FilterResult(False, "good_not_above_beta")
    if not good_clears_alpha(rg, cfg.alpha):
        return FilterResult(False, "good_not_above_alpha")
    return ACCEPT


@dataclass(frozen=True)
class RevisionSignal:
    thought_index: int
    assistant_text: str
    human_ack: str = HUMAN_ACK

    def __post_init__(self):
        from revtraj.resources import revision_thoughts

        thoughts = revision_thoughts()
        if not 0 <= self.thought_index < len(thoughts):
            raise TrajectoryError(f"thought index {self.thought_index} out of range")
        if self.assistant_text != thoughts[self.thought_index]:
            raise TrajectoryError("assistant_text must be the indexed revision thought")
        if self.human_ack != HUMAN_ACK:
            raise TrajectoryError(f"human acknowledgement must be {HUMAN_ACK!r}")

    @property
    def observation(self) -> str:
        return self.human_ack

    @classmethod
    def from_index(cls, index: int) -> "RevisionSignal":
        from revtraj.resources import revision_thoughts

        return cls(index, revision_thoughts()[index])

    def to_dict(self) -> dict:
        return {"index": self.thought_index, "text": self.assistant_text}


RevisionItem = Union[Step, RevisionSignal]


@dataclass(frozen=True)
class RevisionTrajectory:
    pair: TrajectoryPair
    transition: int
    signal: RevisionSignal
    steps: tuple[RevisionItem, ...]
    source: Source = Source.MODEL_GUIDED

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(self, "source", Source(self.source))
        expected = _assemble(self.pair, self.transition, self.signal)
        if self.steps != expected:
            raise TrajectoryError("revision steps do not follow bad prefix + signal + good suffix")

    @property
    def divergence(self) -> int:
        return self.pair.divergence

    @property
    def instruction(self) -> Instruction:
        return self.pair.bad.instruction

    @property
    def reward(self) -> float:
        return self.pair.good.reward

    @property
    def bad_prefix(self) -> tuple[Step, ...]:
        return self.pair.bad.steps[: self.transition]

    @property
    def good_suffix(self) -> tuple[Step, ...]:
        return self.pair.good.steps[self.divergence :]

    def to_dict(self) -> dict:
        items = []
        for item in self.steps:
            if isinstance(item, RevisionSignal):
                items.append({"thought": item.assistant_text, "action": None,
                              "observation": item.human_ack, "signal": True})
            else:
                items.append(item.to_dict())
        return {
            "instruction": self.instruction.to_dict(),
            "steps": items,
            "reward": self.reward,
            "terminal": True,
            "kind": "revision",
            "divergence": self.divergence,
            "transition": self.transition,
            "signal": self.signal.to_dict(),
            "source": self.source.value,
            "bad": self.pair.bad.to_dict(),
            "good": self.pair.good.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RevisionTrajectory":
        pair = TrajectoryPair.of(Trajectory.from_dict(d["bad"]), Trajectory.from_dict(d["good"]))
        if pair.divergence != d["divergence"]:
            raise TrajectoryError("stored divergence disagrees with the stored pair")
        signal = RevisionSignal.from_index(d["signal"]["index"])
        if signal.assistant_text != d["signal"]["text"]:
            raise TrajectoryError("stored signal text differs from the thought table")
        return splice(pair, d["transition"], signal, source=Source(d["source"]))


def _assemble(pair: TrajectoryPair, transition: int, signal: RevisionSignal) -> tuple[RevisionItem, ...]:
    return (*pair.bad.steps[:transition], signal, *pair.good.steps[pair.divergence :])


def splice(
    pair: TrajectoryPair,
    transition: int,
    signal: RevisionSignal,
    source: Source = Source.MODEL_GUIDED,
) -> RevisionTrajectory:
    """Bad steps up to ``transition``, then the signal, then the good suffix."""
    if transition <= pair.divergence:
        raise TransitionBeforeDivergence(
            f"transition {transition} must come after divergence {pair.divergence}")
    if transition > len(pair.bad.steps):
        raise TransitionOutOfRange(
            f"transition {transition} beyond bad trajectory length {len(pair.bad.steps)}")
    return RevisionTrajectory(pair, transition, signal, _assemble(pair, transition, signal), source)


def dedup_by_actions(trajectories: Iterable[Trajectory]) -> list[Trajectory]:
    seen: set[tuple[str, ...]] = set()
    out = []
    for t in trajectories:
        key = t.actions
        if key in seen:
            continue
        seen.add(key)
        out.append(t)
    return out

