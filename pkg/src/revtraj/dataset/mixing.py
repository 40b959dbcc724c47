"""Iteration schedule and agent/general data mixing."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence, TypeVar

T = TypeVar("T")


class EmptyPool(ValueError):
    pass


@dataclass(frozen=True)
class IterationSpec:
    index: int
    alpha: float
    beta: float = 0.2
    # Tasks sampled per environment for this iteration (None: every task).
    simulations: int | None = None
    epochs_hint: int = 1


def _default_iterations() -> tuple[IterationSpec, ...]:
    return (
        IterationSpec(1, 0.5, 0.2, None, 3),
        IterationSpec(2, 0.7, 0.2, None, 1),
        IterationSpec(3, 1.0, 0.2, None, 1),
    )


@dataclass(frozen=True)
class IterationPlan:
    iterations: tuple[IterationSpec, ...] = field(default_factory=_default_iterations)

    def __post_init__(self):
        object.__setattr__(self, "iterations", tuple(self.iterations))
        alphas = [it.alpha for it in self.iterations]
        if any(b < a for a, b in zip(alphas, alphas[1:])):
            raise ValueError("alpha schedule must be non-decreasing")
        for i, it in enumerate(self.iterations, 1):
            if it.index != i:
                raise ValueError("iteration indices must run 1, 2, ...")
            if not 0 < it.beta < it.alpha <= 1:
                raise ValueError(f"iteration {i}: need 0 < beta < alpha <= 1")

    def get(self, index: int) -> IterationSpec:
        if not 1 <= index <= len(self.iterations):
            raise ValueError(f"iteration {index} not in plan (1..{len(self.iterations)})")
        return self.iterations[index - 1]


@dataclass(frozen=True)
class MixConfig:
    """``eta`` is the share of agent samples by default (the literal loss reading).

    Set ``eta_applies_to="general"`` to read it as the general-data share instead.
    """

    eta: float = 0.2
    general_path: str | None = None
    seed: int = 0
    eta_applies_to: str = "agent"

    def __post_init__(self):
        if not 0 <= self.eta <= 1:
            raise ValueError("eta must lie in [0, 1]")
        if self.eta_applies_to not in ("agent", "general"):
            raise ValueError("eta_applies_to must be 'agent' or 'general'")

    @property
    def agent_share(self) -> float:
        return self.eta if self.eta_applies_to == "agent" else 1 - self.eta


def mix(agent: Sequence[T], general: Sequence[T], cfg: MixConfig) -> list[T]:
    """Seeded weighted interleave of two shuffled pools.

    Each slot draws from the agent pool with probability ``agent_share`` and
    stops as soon as the chosen pool is empty.
    """
    share = cfg.agent_share
    if share > 0 and not agent:
        raise EmptyPool("agent pool is empty")
    if share < 1 and not general:
        raise EmptyPool("general pool is empty")
    rng = random.Random(cfg.seed)
    a, g = list(agent), list(general)
    rng.shuffle(a)
    rng.shuffle(g)
    if share == 1:
        return a
    if share == 0:
        return g
    out: list[T] = []
    ia = ig = 0
    while True:
        if rng.random() < share:
            if ia == len(a):
                break
            out.append(a[ia])
            ia += 1
        else:
            if ig == len(g):
                break
            out.append(g[ig])
            ig += 1
    return out
