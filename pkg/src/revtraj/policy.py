"""Actor policies: scripted oracle, uniform random, and a remote chat model."""

from __future__ import annotations

import random
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

from revtraj.chat import ChatClient, ChatUnavailable
from revtraj.env import EnvState, Environment
from revtraj.traj import Instruction, Step

EXPANSION_TEMPERATURE = 1.0
EVAL_TEMPERATURE = 0.0
DEDUP_RETRIES = 3


class PolicyUnavailable(Exception):
    """Transport-level failure of a remote policy; safe to retry."""


@dataclass(frozen=True)
class ActionProposal:
    action: str
    thought: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "action", self.action.strip())
        if not self.action:
            raise ValueError("proposal action must be non-empty")


@dataclass(frozen=True)
class PolicyContext:
    instruction: Instruction
    history: tuple[Step, ...] = ()
    temperature: float = EXPANSION_TEMPERATURE
    n: int = 1
    initial_observation: str = ""
    # Local policies may read the live state instead of replaying history.
    state: EnvState | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "history", tuple(self.history))
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


class Policy(ABC):
    """Proposes actions given the instruction and history.

    ``propose`` returns exactly ``ctx.n`` proposals. Within one call duplicate
    actions are re-drawn up to three times; leftovers stay so the count holds.
    """

    seed: int | None = None

    def propose(self, ctx: PolicyContext) -> list[ActionProposal]:
        out = self._draw_many(ctx, ctx.n)
        for _ in range(DEDUP_RETRIES):
            dup = _duplicate_slots(out)
            if not dup:
                break
            fresh = self._draw_many(ctx, len(dup))
            for i, p in zip(dup, fresh):
                out[i] = p
        return out

    def _draw_many(self, ctx: PolicyContext, k: int) -> list[ActionProposal]:
        return [self._draw(ctx) for _ in range(k)]

    @abstractmethod
    def _draw(self, ctx: PolicyContext) -> ActionProposal: ...

    @abstractmethod
    def fork(self, seed: int | str) -> "Policy":
        """Copy of this policy with a fresh generator seeded by ``seed``."""


def _duplicate_slots(proposals: list[ActionProposal]) -> list[int]:
    seen: set[str] = set()
    dup = []
    for i, p in enumerate(proposals):
        if p.action in seen:
            dup.append(i)
        else:
            seen.add(p.action)
    return dup


def _current_state(env: Environment, ctx: PolicyContext) -> EnvState:
    if ctx.state is not None and ctx.state.owner == env.uid:
        return ctx.state
    _, state = env.replay_state(ctx.instruction.task_id, [s.action for s in ctx.history])
    return state


class ScriptedOracle(Policy):
    """Follows the environment's optimal plan, but with probability ``epsilon``
    per draw plays a uniformly chosen distractor instead."""

    def __init__(self, env: Environment, epsilon: float = 0.0, seed: int | str | None = 0):
        if not 0 <= epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        self.env = env
        self.epsilon = epsilon
        self.seed = seed
        self.rng = random.Random(seed)

    def fork(self, seed):
        return ScriptedOracle(self.env, self.epsilon, seed)

    def _draw(self, ctx):
        task = ctx.instruction.task_id
        # always consume one draw so the stream does not depend on epsilon edge cases
        deviate = self.rng.random() < self.epsilon
        plan = self.env.plan(_current_state(self.env, ctx))
        if deviate or not plan:
            action = self.rng.choice(self.env.distractors(task))
        else:
            action = plan[0]
        return ActionProposal(action, thought=f"I will {action}.")


class RandomPolicy(Policy):
    def __init__(self, env: Environment, seed: int | str | None = 0):
        self.env = env
        self.seed = seed
        self.rng = random.Random(seed)

    def fork(self, seed):
        return RandomPolicy(self.env, seed)

    def _draw(self, ctx):
        action = self.rng.choice(self.env.action_space(ctx.instruction.task_id))
        return ActionProposal(action, thought=f"Let me try {action}.")


_THOUGHT_ACTION = re.compile(r"(?:Thought:\s*(?P<thought>.*?)\s*)?Action:\s*(?P<action>[^\n]+)", re.S)


def parse_proposal(text: str) -> ActionProposal | None:
    """Split a ``Thought: ... Action: ...`` completion; ``None`` if no action."""
    m = _THOUGHT_ACTION.search(text)
    if not m or not m.group("action").strip():
        return None
    thought = m.group("thought")
    return ActionProposal(m.group("action").strip(), thought=thought.strip() if thought else None)


def context_messages(ctx: PolicyContext) -> list[dict]:
    first = ctx.instruction.text
    if ctx.initial_observation:
        first += "\n" + ctx.initial_observation
    msgs = [{"role": "user", "content": first}]
    for step in ctx.history:
        msgs.append({"role": "assistant", "content": step.assistant_text()})
        msgs.append({"role": "user", "content": step.observation})
    return msgs


class RemotePolicy(Policy):
    """Policy served by a chat-completions endpoint."""

    def __init__(self, chat: ChatClient, stop: list[str] | None = None):
        self.chat = chat
        self.stop = stop or ["\nObservation:"]

    def fork(self, seed):
        return self

    def _draw(self, ctx):
        return self._draw_many(ctx, 1)[0]

    def _draw_many(self, ctx, k):
        msgs = context_messages(ctx)
        texts = self._complete(msgs, k, ctx.temperature)
        parsed = [parse_proposal(t) for t in texts]
        bad = [i for i, p in enumerate(parsed) if p is None]
        if bad:
            retry = self._complete(msgs, len(bad), ctx.temperature)
            for i, text in zip(bad, retry):
                parsed[i] = parse_proposal(text) or _degenerate(texts[i])
        return parsed

    def _complete(self, msgs, k, temperature):
        try:
            texts = self.chat.complete(msgs, n=k, temperature=temperature, stop=self.stop)
        except ChatUnavailable as exc:
            raise PolicyUnavailable(str(exc)) from exc
        if len(texts) < k:
            texts = texts + [""] * (k - len(texts))
        return texts[:k]


def _degenerate(text: str) -> ActionProposal:
    line = " ".join(text.split())
    return ActionProposal(line or "(no action)")


@dataclass
class RolloutResult:
    steps: list[Step]
    state: EnvState

    @property
    def reward(self) -> float:
        return self.state.reward


def rollout(
    policy: Policy,
    env: Environment,
    instruction: Instruction,
    state: EnvState,
    history: tuple[Step, ...] = (),
    depth_budget: int = 20,
    temperature: float = EXPANSION_TEMPERATURE,
    initial_observation: str = "",
) -> RolloutResult:
    """Play single proposals until the episode ends or the budget runs out.

    Running out of budget applies the environment's terminal ruling.
    """
    steps: list[Step] = []
    while not state.done and len(steps) < depth_budget:
        ctx = PolicyContext(instruction, history + tuple(steps), temperature, 1,
                            initial_observation, state)
        proposal = policy.propose(ctx)[0]
        state, result = env.step(state, proposal.action)
        steps.append(Step(proposal.action, result.observation, proposal.thought))
    if not state.done:
        state = env.terminate(state)
    return RolloutResult(steps, state)
