"""Pair harvested trajectories and assemble revision trajectories."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from revtraj.judge import Judge, JudgeQuery, JudgeUnavailable, Label
from revtraj.resources import revision_thoughts
from revtraj.traj import (
    FilterConfig,
    Kind,
    RevisionSignal,
    RevisionTrajectory,
    Source,
    Trajectory,
    TrajectoryPair,
    classify_pair,
    dedup_by_actions,
    good_clears_alpha,
    shared_prefix,
    splice,
)

log = logging.getLogger(__name__)


class TransitionMode(str, Enum):
    MODEL_GUIDED = "model_guided"
    DIRECT = "direct"


@dataclass(frozen=True)
class PairingConfig:
    filter: FilterConfig = field(default_factory=FilterConfig)
    max_pairs_per_task: int = 32
    pair_strategy: str = "best_good_longest_prefix"
    # Number of goods each bad trajectory may be paired with.
    pairs_per_bad: int = 1

    def __post_init__(self):
        if self.max_pairs_per_task < 1:
            raise ValueError("max_pairs_per_task must be >= 1")
        if self.pairs_per_bad < 1:
            raise ValueError("pairs_per_bad must be >= 1")
        if self.pair_strategy != "best_good_longest_prefix":
            raise ValueError(f"unknown pair strategy {self.pair_strategy!r}")


def build_pairs(harvest: Sequence[Trajectory], cfg: PairingConfig) -> list[TrajectoryPair]:
    """Pair each bad trajectory with its best accepted good.

    Goods are ranked by reward, then shared-prefix length, then harvest order.
    Candidates whose shared prefix leaves no bad step to revise are skipped.
    """
    beta = cfg.filter.beta
    pairs: list[TrajectoryPair] = []
    for bad in harvest:
        if len(pairs) >= cfg.max_pairs_per_task:
            break
        if bad.reward is None or not bad.reward < beta:
            continue
        ranked = []
        for order, good in enumerate(harvest):
            if good is bad or good.reward is None or good.reward < beta:
                continue
            t = shared_prefix(bad, good)
            if t >= len(bad.steps) or t >= len(good.steps):
                continue
            pair = TrajectoryPair(bad, good, t)
            if not classify_pair(pair, cfg.filter):
                continue
            ranked.append((-good.reward, -t, order, pair))
        ranked.sort(key=lambda x: x[:3])
        for *_, pair in ranked[: cfg.pairs_per_bad]:
            if len(pairs) >= cfg.max_pairs_per_task:
                break
            pairs.append(pair)
    return pairs


def find_transition(pair: TrajectoryPair, judge: Judge | None, mode: TransitionMode) -> int:
    """Index of the first bad step after the divergence, or the bad length if none.

    Steps are 1-based: returning ``j`` keeps ``bad.steps[:j]``. Uncertain
    verdicts keep the scan going.
    """
    bad = pair.bad
    last = len(bad.steps)
    if TransitionMode(mode) is TransitionMode.DIRECT:
        return last
    for j in range(pair.divergence + 1, last + 1):
        step = bad.steps[j - 1]
        q = JudgeQuery(bad.instruction.text, bad.steps[: j - 1], step.action, step.observation,
                       task_id=bad.instruction.task_id)
        if judge.judge_step(q).label is Label.BAD:
            return j
    return last


def sample_signal(rng: random.Random) -> RevisionSignal:
    index = rng.randrange(len(revision_thoughts()))
    return RevisionSignal.from_index(index)


def pair_rng(seed: int | str, index: int) -> random.Random:
    return random.Random(f"{seed}/pair/{index}")


@dataclass
class RevisionBatch:
    revisions: list[RevisionTrajectory]
    goods: list[Trajectory]
    judge_skipped: int = 0


def select_goods(harvest: Sequence[Trajectory], cfg: FilterConfig) -> list[Trajectory]:
    """Distinct trajectories that clear both thresholds, tagged good or optimal."""
    out = []
    for t in dedup_by_actions(harvest):
        if t.reward is None or not cfg.beta < t.reward or not good_clears_alpha(t.reward, cfg.alpha):
            continue
        out.append(t.with_kind(Kind.OPTIMAL if t.reward == 1 else Kind.GOOD))
    return out


def build_revisions(
    pairs: Sequence[TrajectoryPair],
    judge: Judge | None,
    mode: TransitionMode,
    seed: int | str,
    harvest: Sequence[Trajectory] = (),
    filter_cfg: FilterConfig | None = None,
) -> RevisionBatch:
    """One revision per pair; goods are accepted pair goods plus standalone goods.

    Each pair draws its signal from its own generator (``pair_rng(seed, i)``)
    so the result does not depend on processing order.
    """
    mode = TransitionMode(mode)
    source = Source.DIRECT if mode is TransitionMode.DIRECT else Source.MODEL_GUIDED
    revisions, skipped = [], 0
    for i, pair in enumerate(pairs):
        try:
            t_prime = find_transition(pair, judge, mode)
        except JudgeUnavailable as exc:
            log.warning("judge unavailable for pair %d of %s: %s", i,
                        pair.bad.instruction.task_id, exc)
            skipped += 1
            continue
        signal = sample_signal(pair_rng(seed, i))
        revisions.append(splice(pair, t_prime, signal, source))

    pool = [p.good for p in pairs] + list(harvest)
    goods = select_goods(pool, filter_cfg) if filter_cfg else [
        g.with_kind(Kind.OPTIMAL if g.reward == 1 else Kind.GOOD)
        for g in dedup_by_actions(p.good for p in pairs)
    ]
    return RevisionBatch(revisions, goods, skipped)
