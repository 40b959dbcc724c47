"""Three self-training collection iterations on the bundled desk suite.

Prints a per-iteration table of revision/good counts (the shape of a data
statistics table) and the mean transition point for both transition modes.

    python3 scripts/desk_pipeline.py --out runs/desk --seed 42
"""

from __future__ import annotations

import argparse
import logging
import shutil
import time
from pathlib import Path

from revtraj.agents import JudgeSpec, PolicySpec
from revtraj.dataset import IterationPlan, manifest, run_iteration
from revtraj.dataset.samples import read_records
from revtraj.mcts import MctsConfig


def mean_transition(path: Path, env: str) -> float | None:
    recs = [r for r in read_records(path / "trajectories" / "revisions.jsonl")
            if r["instruction"]["env"] == env]
    return sum(r["transition"] for r in recs) / len(recs) if recs else None


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="runs/desk")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--epsilon", type=float, default=0.3)
    ap.add_argument("--simulations", type=int, default=100)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    root = Path(args.out)
    if root.exists():
        shutil.rmtree(root)
    plan = IterationPlan()
    rows = []
    for mode in ("model_guided", "direct"):
        start = time.perf_counter()
        for it in (1, 2, 3):
            d = run_iteration(plan, it, root / mode, {"craft": None, "graded": None},
                              policy=PolicySpec(epsilon=args.epsilon), judge=JudgeSpec(),
                              mcts=MctsConfig(simulations=args.simulations), mode=mode,
                              seed=args.seed, workers=args.workers)
            m = manifest(d)
            for env, e in m["envs"].items():
                rows.append((mode, it, m["alpha"], env, e["revision"], e["good"],
                             e["tasks_with_revision"], e["simulations"], mean_transition(d, env)))
        print(f"{mode}: {time.perf_counter() - start:.1f}s")

    print(f"\n{'mode':<13}{'iter':>5}{'alpha':>6}  {'env':<8}{'revision':>9}{'good':>7}"
          f"{'tasks w/ rev':>14}{'mean t':>8}")
    for mode, it, alpha, env, rev, good, with_rev, n, t in rows:
        shown = "-" if t is None else f"{t:.2f}"
        print(f"{mode:<13}{it:>5}{alpha:>6}  {env:<8}{rev:>9}{good:>7}{with_rev:>8}/{n:<5}{shown:>8}")


if __name__ == "__main__":
    main()
