"""One self-training data-collection iteration and its manifest.

Directory layout written by :func:`run_iteration`::

    iter_<n>/
      revisions.jsonl          rendered revision samples
      goods.jsonl              rendered good samples
      mixed.jsonl              agent samples mixed with general data
      trajectories/            raw revision / good trajectory JSON
      trees/                   one MCTS tree dump per task
      collection.json          per-task collection statistics
      manifest.json            counts per environment (recomputed from files)
"""

from __future__ import annotations

import json
import logging
import os
import random
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

from revtraj.agents import JudgeSpec, PolicySpec, build_judge, build_policy
from revtraj.dataset.mixing import IterationPlan, MixConfig, mix
from revtraj.dataset.samples import (
    load_general,
    read_records,
    render_sample,
    write_jsonl,
    write_records,
)
from revtraj.env import DEFAULT_MAX_ROUNDS, make_env
from revtraj.mcts import MctsConfig, run_search
from revtraj.revision import PairingConfig, TransitionMode, build_pairs, build_revisions
from revtraj.traj import FilterConfig, RevisionTrajectory, Trajectory, good_clears_alpha

log = logging.getLogger(__name__)


class RefusesOverwrite(FileExistsError):
    pass


class MissingPriorIteration(FileNotFoundError):
    pass


def iteration_dir(root: str | os.PathLike, index: int) -> Path:
    return Path(root) / f"iter_{index}"


@dataclass(frozen=True)
class TaskJob:
    env_name: str
    task_id: str
    iteration: int
    seed: int
    policy: PolicySpec
    judge: JudgeSpec
    mcts: MctsConfig
    pairing: PairingConfig
    mode: TransitionMode
    max_rounds: int = DEFAULT_MAX_ROUNDS

    @property
    def task_seed(self) -> str:
        base = f"{self.seed}/{self.iteration}/{self.env_name}/{self.task_id}"
        # a non-zero search seed salts the stream without changing default outputs
        return f"{base}/{self.mcts.seed}" if self.mcts.seed else base


@dataclass
class TaskOutput:
    env_name: str
    task_id: str
    revisions: list[RevisionTrajectory] = field(default_factory=list)
    goods: list[Trajectory] = field(default_factory=list)
    tree: dict | None = None
    stats: dict[str, Any] = field(default_factory=dict)
    error: str | None = None


def collect_task(job: TaskJob) -> TaskOutput:
    """Search one task, pair its harvest and build revisions (runs in a worker)."""
    out = TaskOutput(job.env_name, job.task_id)
    try:
        env = make_env(job.env_name, job.max_rounds)
        policy = build_policy(job.policy, env, job.task_seed)
        judge = build_judge(job.judge, env)
        result = run_search(env, job.task_id, policy, job.mcts)
        harvest = result.trajectories
        pairs = build_pairs(harvest, job.pairing)
        batch = build_revisions(pairs, judge, job.mode, job.task_seed, harvest, job.pairing.filter)
    except Exception as exc:  # noqa: BLE001 - task failures are recorded, not fatal
        log.warning("task %s/%s failed: %s", job.env_name, job.task_id, exc)
        out.error = f"{type(exc).__name__}: {exc}"
        return out
    out.revisions = batch.revisions
    out.goods = batch.goods
    out.tree = result.tree.to_dict(result.log)
    out.stats = {
        "mcts_iterations": result.iterations,
        "rollouts": result.tree.root.visits,
        "rollout_failures": result.rollout_failures,
        "harvest_raw": result.raw_harvest,
        "harvest_dedup": len(result.harvest),
        "pairs": len(pairs),
        "judge_skipped": batch.judge_skipped,
        "revisions": len(batch.revisions),
        "goods": len(batch.goods),
        "search_exhausted": result.exhausted,
    }
    return out


def _run_jobs(jobs: Sequence[TaskJob], workers: int) -> list[TaskOutput]:
    if workers <= 1 or len(jobs) <= 1:
        return [collect_task(j) for j in jobs]
    results: list[TaskOutput | None] = [None] * len(jobs)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(collect_task, j): i for i, j in enumerate(jobs)}
        try:
            for fut, i in futures.items():
                results[i] = fut.result()
        except KeyboardInterrupt:
            log.warning("interrupted: cancelling queued tasks, finishing in-flight ones")
            pool.shutdown(wait=True, cancel_futures=True)
            for fut, i in futures.items():
                if fut.done() and not fut.cancelled() and fut.exception() is None:
                    results[i] = fut.result()
            raise
    return [r for r in results if r is not None]


def sample_tasks(tasks: Sequence[str], count: int | None, seed: int | str) -> list[str]:
    if count is None or count >= len(tasks):
        return list(tasks)
    chosen = set(random.Random(f"{seed}/tasks").sample(list(tasks), count))
    return [t for t in tasks if t in chosen]


def run_iteration(
    plan: IterationPlan,
    iteration_index: int,
    out_root: str | os.PathLike,
    envs: dict[str, Sequence[str] | None],
    policy: PolicySpec = PolicySpec(),
    judge: JudgeSpec = JudgeSpec(),
    mcts: MctsConfig = MctsConfig(),
    mode: TransitionMode = TransitionMode.MODEL_GUIDED,
    mix_cfg: MixConfig = MixConfig(),
    max_pairs_per_task: int = 32,
    seed: int = 42,
    workers: int = 1,
    force: bool = False,
    carry_forward: bool = False,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> Path:
    """Collect, pair, revise, render and mix one iteration into ``iter_<n>/``.

    ``envs`` maps environment names to task ids (``None`` selects every task).
    The policy spec is a parameter so a retrained model endpoint can be swapped
    in between iterations.
    """
    spec = plan.get(iteration_index)
    out = iteration_dir(out_root, iteration_index)
    if iteration_index > 1 and not iteration_dir(out_root, iteration_index - 1).is_dir():
        raise MissingPriorIteration(f"iteration {iteration_index - 1} not found under {out_root}")
    if out.exists() and any(out.iterdir()):
        if not force:
            raise RefusesOverwrite(f"{out} already exists; pass force to overwrite")
        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)

    filt = FilterConfig(beta=spec.beta, alpha=spec.alpha)
    pairing = PairingConfig(filter=filt, max_pairs_per_task=max_pairs_per_task)
    jobs, test_sizes, sampled = [], {}, {}
    for env_name, tasks in envs.items():
        env = make_env(env_name, max_rounds)
        all_tasks = list(tasks) if tasks else env.tasks()
        chosen = sample_tasks(all_tasks, spec.simulations, f"{seed}/{iteration_index}/{env_name}")
        test_sizes[env_name] = len(all_tasks)
        sampled[env_name] = len(chosen)
        jobs += [TaskJob(env_name, t, iteration_index, seed, policy, judge, mcts, pairing,
                         TransitionMode(mode), max_rounds) for t in chosen]

    outputs: list[TaskOutput] = []
    try:
        outputs = _run_jobs(jobs, workers)
    finally:
        _write_outputs(out, outputs, plan, iteration_index, mix_cfg, mode, carry_forward,
                       out_root, filt, test_sizes, sampled, seed, policy, judge, mcts,
                       complete=len(outputs) == len(jobs))
    return out


def _write_outputs(out, outputs, plan, index, mix_cfg, mode, carry_forward, out_root, filt,
                   test_sizes, sampled, seed, policy, judge, mcts, complete):
    spec = plan.get(index)
    revisions = [r for o in outputs for r in o.revisions]
    goods = [g for o in outputs for g in o.goods]
    if carry_forward and index > 1:
        prior = iteration_dir(out_root, index - 1) / "trajectories" / "goods.jsonl"
        seen = {g.actions for g in goods}
        for rec in read_records(prior) if prior.exists() else []:
            g = Trajectory.from_dict(rec)
            if g.actions not in seen and filt.beta < g.reward and good_clears_alpha(g.reward, filt.alpha):
                goods.append(g)
                seen.add(g.actions)

    write_records((r.to_dict() for r in revisions), out / "trajectories" / "revisions.jsonl")
    write_records((g.to_dict() for g in goods), out / "trajectories" / "goods.jsonl")
    rev_samples = [render_sample(r, index) for r in revisions]
    good_samples = [render_sample(g, index) for g in goods]
    write_jsonl(rev_samples, out / "revisions.jsonl")
    write_jsonl(good_samples, out / "goods.jsonl")

    agent = rev_samples + good_samples
    general = load_general(mix_cfg.general_path) if mix_cfg.general_path else []
    if general and agent:
        mixed = mix(agent, general, mix_cfg)
    else:
        if not general:
            log.warning("no general data configured; mixed.jsonl holds agent samples only")
        mixed = mix(agent, [], MixConfig(eta=1.0, seed=mix_cfg.seed)) if agent else list(general)
    write_jsonl(mixed, out / "mixed.jsonl")

    trees = out / "trees"
    trees.mkdir(exist_ok=True)
    for o in outputs:
        if o.tree is not None:
            # compact: trees dominate the iteration's disk footprint
            (trees / f"{o.env_name}__{o.task_id}.json").write_text(
                json.dumps(o.tree, separators=(",", ":"), ensure_ascii=False) + "\n",
                encoding="utf-8")

    collection = {
        "iteration": index,
        "complete": complete,
        "alpha": spec.alpha,
        "beta": spec.beta,
        "epochs_hint": spec.epochs_hint,
        "eta": mix_cfg.eta,
        "eta_applies_to": mix_cfg.eta_applies_to,
        "general_path": mix_cfg.general_path,
        "mode": TransitionMode(mode).value,
        "seed": seed,
        "policy": asdict(policy),
        "judge": asdict(judge),
        "mcts": asdict(mcts),
        "test_size": test_sizes,
        "tasks_sampled": sampled,
        "carry_forward": carry_forward,
        "tasks": [
            {"env": o.env_name, "task_id": o.task_id, "error": o.error, **o.stats}
            for o in outputs
        ],
    }
    _dump_json(collection, out / "collection.json")
    _dump_json(manifest(out), out / "manifest.json")


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _count_by_env(path: Path) -> dict[str, int]:
    counts: dict[str, int] = {}
    if path.exists():
        for rec in read_records(path):
            env = rec.get("meta", {}).get("env", "unknown")
            counts[env] = counts.get(env, 0) + 1
    return counts


def manifest(iteration_path: str | os.PathLike) -> dict[str, Any]:
    """Per-environment counts for one iteration directory.

    Revision and good counts are recounted from the JSONL files; collection
    statistics come from ``collection.json`` when present. Missing pieces count
    as zero.
    """
    path = Path(iteration_path)
    revisions = _count_by_env(path / "revisions.jsonl")
    goods = _count_by_env(path / "goods.jsonl")
    mixed_kinds: dict[str, int] = {}
    if (path / "mixed.jsonl").exists():
        for rec in read_records(path / "mixed.jsonl"):
            mixed_kinds[rec["kind"]] = mixed_kinds.get(rec["kind"], 0) + 1
    collection: dict[str, Any] = {}
    if (path / "collection.json").exists():
        collection = json.loads((path / "collection.json").read_text(encoding="utf-8"))

    env_names = sorted(set(revisions) | set(goods) | set(collection.get("test_size", {})))
    envs = {}
    for env in env_names:
        tasks = [t for t in collection.get("tasks", []) if t["env"] == env]
        envs[env] = {
            "revision": revisions.get(env, 0),
            "good": goods.get(env, 0),
            "simulations": collection.get("tasks_sampled", {}).get(env, 0),
            "test_size": collection.get("test_size", {}).get(env, 0),
            "mcts_iterations": sum(t.get("mcts_iterations", 0) for t in tasks),
            "judge_skipped": sum(t.get("judge_skipped", 0) for t in tasks),
            "harvest_raw": sum(t.get("harvest_raw", 0) for t in tasks),
            "harvest_dedup": sum(t.get("harvest_dedup", 0) for t in tasks),
            "pairs": sum(t.get("pairs", 0) for t in tasks),
            "tasks_with_revision": sum(1 for t in tasks if t.get("revisions", 0) > 0),
            "failed_tasks": [t["task_id"] for t in tasks if t.get("error")],
        }
    totals = {
        "revision": sum(e["revision"] for e in envs.values()),
        "good": sum(e["good"] for e in envs.values()),
    }
    return {
        "iteration": collection.get("iteration"),
        "alpha": collection.get("alpha"),
        "beta": collection.get("beta"),
        "eta": collection.get("eta"),
        "epochs_hint": collection.get("epochs_hint"),
        "complete": collection.get("complete", False),
        "envs": envs,
        "totals": totals,
        "mixed": mixed_kinds,
    }
