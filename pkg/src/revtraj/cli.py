"""Command line entry point: ``revtraj collect | eval | stats``.

Exit codes: 0 success (possibly with warnings), 1 usage or config error,
2 runtime failure. Logs go to stderr; data goes to files, tables to stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from pathlib import Path

from revtraj.agents import build_policy
from revtraj.config import ConfigError, RunConfig, config_keys, load_config, override
from revtraj.dataset import MissingPriorIteration, RefusesOverwrite, iteration_dir, manifest, run_iteration
from revtraj.dataset.samples import read_records, write_records
from revtraj.env import ENVIRONMENTS, make_env
from revtraj.metrics import evaluate, loop_profile, revision_eval, revision_length
from revtraj.traj import RevisionTrajectory, Trajectory

log = logging.getLogger("revtraj")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _epilog() -> str:
    return ("config keys (YAML file given with --config; flags take precedence):\n"
            + "\n".join(f"  {k}" for k in config_keys())
            + "\n\ncredentials: endpoint API keys are read from the variable named by "
              "policy.api_key_env / judge.api_key_env (default REVTRAJ_API_KEY)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="revtraj", description="Revision-trajectory self-training data tools.",
                     epilog=_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--out", help="output root (default: runs)")
    common.add_argument("--seed", type=int)
    common.add_argument("--env", action="append", choices=sorted(ENVIRONMENTS),
                        help="environment to use (repeatable; default: config)")

    agent = _Parser(add_help=False)
    agent.add_argument("--policy", choices=["oracle", "random", "remote"])
    agent.add_argument("--epsilon", type=float, help="oracle deviation probability")
    agent.add_argument("--endpoint", help="chat endpoint for a remote policy")
    agent.add_argument("--model")

    c = sub.add_parser("collect", parents=[common, agent], help="run one data-collection iteration")
    c.add_argument("--iter", type=int, default=1, dest="iteration")
    c.add_argument("--mode", choices=["model_guided", "direct"])
    c.add_argument("--judge", choices=["oracle", "remote", "all_good"])
    c.add_argument("--judge-endpoint")
    c.add_argument("--simulations", type=int, help="MCTS iterations per task")
    c.add_argument("--workers", type=int, help="worker processes (0: host parallelism)")
    c.add_argument("--force", action="store_true", help="overwrite an existing iteration")
    c.add_argument("--carry-forward", action="store_true", default=None,
                   help="re-filter the previous iteration's goods into this one")

    e = sub.add_parser("eval", parents=[common, agent], help="evaluate a policy")
    e.add_argument("--mode", choices=["test", "revision"], default="test")
    e.add_argument("--max-rounds", type=int)
    e.add_argument("--task", action="append", help="task id (repeatable; default: all)")
    e.add_argument("--failures", help="trajectory JSONL to resume in revision mode "
                                      "(default: reward-0 episodes of a test run)")

    s = sub.add_parser("stats", parents=[common], help="summarise iteration directories")
    s.add_argument("--iter", type=int, dest="iteration", help="one iteration (default: all)")
    s.add_argument("--loops", action="store_true", help="loop profile of source trajectories")
    s.add_argument("--revision-length", action="store_true")
    s.add_argument("--trajectories", help="loop profile of a trajectory JSONL instead")
    s.add_argument("--max-len", type=int, default=5)
    s.add_argument("--json", action="store_true", help="print JSON instead of tables")
    return parser


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    envs = {name: cfg.envs.get(name, []) for name in args.env} if args.env else None
    return override(
        cfg,
        out=args.out,
        seed=args.seed,
        envs=envs,
        policy__kind=getattr(args, "policy", None),
        policy__epsilon=getattr(args, "epsilon", None),
        policy__endpoint=getattr(args, "endpoint", None),
        policy__model=getattr(args, "model", None),
        judge__kind=getattr(args, "judge", None),
        judge__endpoint=getattr(args, "judge_endpoint", None),
        mcts__simulations=getattr(args, "simulations", None),
        workers=getattr(args, "workers", None),
        carry_forward=getattr(args, "carry_forward", None),
        mode=args.mode if args.command == "collect" else None,
    )


def cmd_collect(args, cfg: RunConfig) -> int:
    workers = cfg.workers or os.cpu_count() or 1
    out = run_iteration(
        cfg.plan, args.iteration, cfg.out, cfg.env_tasks(),
        policy=cfg.policy, judge=cfg.judge, mcts=cfg.mcts, mode=cfg.mode, mix_cfg=cfg.mix,
        max_pairs_per_task=cfg.max_pairs_per_task, seed=cfg.seed, workers=workers,
        force=args.force, carry_forward=cfg.carry_forward, max_rounds=cfg.max_rounds,
    )
    info = manifest(out)
    for env, counts in info["envs"].items():
        log.info("%s: %d revisions, %d goods, %d/%d tasks with revisions", env,
                 counts["revision"], counts["good"], counts["tasks_with_revision"],
                 counts["simulations"])
        if counts["failed_tasks"]:
            log.warning("%s: %d tasks failed: %s", env, len(counts["failed_tasks"]),
                        ", ".join(counts["failed_tasks"]))
    print(out)
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for env_name, tasks in cfg.env_tasks().items():
        env = make_env(env_name, cfg.max_rounds)
        tasks = args.task and [t for t in args.task if t in env.tasks()] or (
            [] if args.task else (tasks or env.tasks()))
        if not tasks:
            log.warning("%s: no tasks selected; empty report", env_name)
        policy = build_policy(cfg.policy, env, f"{cfg.seed}/eval/{env_name}")
        if args.mode == "test":
            rounds = args.max_rounds or cfg.eval.test_rounds
            report, trajs = evaluate(policy, env, tasks, rounds)
        else:
            rounds = args.max_rounds or cfg.eval.revision_rounds
            if args.failures:
                pool = [Trajectory.from_dict(r) for r in read_records(args.failures)]
                pool = [t for t in pool if t.instruction.env_name == env_name]
            else:
                source = build_policy(cfg.policy, env, f"{cfg.seed}/failures/{env_name}")
                _, pool = evaluate(source, env, tasks, cfg.eval.test_rounds)
            failures = [t for t in pool if t.reward == 0]
            if not failures:
                log.warning("%s: no reward-0 failures to resume", env_name)
            report = revision_eval(policy, env, failures, random.Random(f"{cfg.seed}/truncate"),
                                   rounds)
            trajs = []
        stem = f"eval_{args.mode}_{env_name}"
        (out / f"{stem}.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n",
                                         encoding="utf-8")
        if trajs:
            write_records((t.to_dict() for t in trajs), out / f"{stem}_trajectories.jsonl")
        print(report.table())
        reports.append(report)
        for t in report.tasks:
            if t.flag == "failed":
                log.warning("%s: %s failed and was scored 0", env_name, t.task_id)
    return EXIT_OK


def _source_trajectories(path: Path) -> list[Trajectory]:
    seen, out = set(), []
    rev_file = path / "trajectories" / "revisions.jsonl"
    good_file = path / "trajectories" / "goods.jsonl"
    records = []
    if rev_file.exists():
        for rec in read_records(rev_file):
            records += [rec["bad"], rec["good"]]
    if good_file.exists():
        records += read_records(good_file)
    for rec in records:
        t = Trajectory.from_dict(rec)
        key = (t.instruction.env_name, t.instruction.task_id, t.actions)
        if key not in seen:
            seen.add(key)
            out.append(t)
    return out


def cmd_stats(args, cfg: RunConfig) -> int:
    if args.trajectories:
        trajs = [Trajectory.from_dict(r) for r in read_records(args.trajectories)]
        if not trajs:
            log.warning("no trajectories in %s", args.trajectories)
            return EXIT_OK
        profile = loop_profile(trajs, args.max_len)
        print(json.dumps(profile.to_dict(), indent=2) if args.json else profile.table())
        return EXIT_OK

    root = Path(cfg.out)
    if not root.is_dir():
        raise FileNotFoundError(f"output root {root} does not exist")
    if args.iteration is not None:
        dirs = [iteration_dir(root, args.iteration)]
        if not dirs[0].is_dir():
            raise FileNotFoundError(f"{dirs[0]} does not exist")
    else:
        dirs = sorted((p for p in root.glob("iter_*") if p.is_dir()),
                      key=lambda p: int(p.name.split("_", 1)[1]))
    if not dirs:
        log.warning("no iteration directories under %s; all counts are zero", root)
        print(json.dumps({"iterations": {}, "totals": {"revision": 0, "good": 0}}, indent=2))
        return EXIT_OK

    summary = {}
    for d in dirs:
        info = {"manifest": manifest(d)}
        if args.revision_length:
            revs = [RevisionTrajectory.from_dict(r)
                    for r in read_records(d / "trajectories" / "revisions.jsonl")] \
                if (d / "trajectories" / "revisions.jsonl").exists() else []
            info["revision_length"] = revision_length(revs)
        if args.loops:
            trajs = _source_trajectories(d)
            info["loops"] = loop_profile(trajs, args.max_len).to_dict() if trajs else None
            if not trajs:
                log.warning("%s: no trajectories for a loop profile", d)
        summary[d.name] = info
        if not args.json:
            _print_iteration(d.name, info, trajs if args.loops else None, args.max_len)
    if args.json:
        print(json.dumps(summary, indent=2))
    return EXIT_OK


def _print_iteration(name: str, info: dict, trajs, max_len: int) -> None:
    m = info["manifest"]
    print(f"{name}  alpha={m['alpha']} beta={m['beta']} complete={m['complete']}")
    print(f"  {'env':<10}{'revision':>10}{'good':>8}{'tasks':>7}{'with rev':>10}")
    for env, e in m["envs"].items():
        print(f"  {env:<10}{e['revision']:>10}{e['good']:>8}{e['simulations']:>7}"
              f"{e['tasks_with_revision']:>10}")
    if "revision_length" in info:
        rl = info["revision_length"]
        print(f"  revision length: {'absent' if rl is None else f'{rl:.4f}'}")
    if trajs:
        print("  loop profile:")
        for line in loop_profile(trajs, max_len).table().splitlines():
            print(f"    {line}")


COMMANDS = {"collect": cmd_collect, "eval": cmd_eval, "stats": cmd_stats}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _resolve(args)
    except (ConfigError, ValueError) as exc:
        print(f"revtraj: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, cfg)
    except (MissingPriorIteration, RefusesOverwrite) as exc:
        print(f"revtraj: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        print("revtraj: interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - top-level runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"revtraj: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
