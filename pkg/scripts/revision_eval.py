"""Truncate-and-resume evaluation on failed episodes.

Failures come from short, noisy oracle episodes. Each is cut at a random step,
replayed, and resumed by oracles of decreasing noise. A policy that can revise
should recover more often as its deviation rate drops. The loop profile of the
failures and of the resumed episodes is printed alongside.

    python3 scripts/revision_eval.py --failures 50 --seed 0
"""

from __future__ import annotations

import argparse
import random

from revtraj.env import CraftEnv, GradedPathEnv
from revtraj.metrics import loop_profile, revision_eval
from revtraj.policy import ScriptedOracle, rollout


def collect_failures(env, n, seed, rounds=12, epsilon=0.7):
    rng = random.Random(seed)
    short = env.with_max_rounds(rounds)
    out = []
    while len(out) < n:
        task = rng.choice(env.tasks())
        instr, state, obs = short.reset(task)
        res = rollout(ScriptedOracle(short, epsilon, f"{seed}/{len(out)}/{rng.random()}"), short,
                      instr, state, (), rounds, 0.0, obs)
        if res.reward == 0 and len(res.steps) >= 2:
            out.append(short.replay(task, [s.action for s in res.steps]))
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--failures", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-rounds", type=int, default=50)
    args = ap.parse_args()

    for env in (CraftEnv(), GradedPathEnv()):
        failures = collect_failures(env, args.failures, args.seed)
        print(f"== {env.name}: {len(failures)} failures")
        print(loop_profile(failures).table())
        for eps in (0.0, 0.2, 0.5, 0.8):
            report = revision_eval(ScriptedOracle(env, eps, args.seed), env, failures,
                                   random.Random(args.seed), args.max_rounds)
            print(f"epsilon {eps:.1f}: average reward {report.average_reward:.3f}, "
                  f"success {report.success_rate:.3f}, excluded {len(report.excluded)}")


if __name__ == "__main__":
    main()
