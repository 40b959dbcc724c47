"""Run configuration: YAML file -> dataclasses, with strict key checking.

Precedence is flags > config file > built-in defaults. The CLI applies flags
with :func:`override` after :func:`load_config`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from revtraj.agents import JudgeSpec, PolicySpec
from revtraj.dataset.mixing import IterationPlan, IterationSpec, MixConfig
from revtraj.env import DEFAULT_MAX_ROUNDS, ENVIRONMENTS, REVISION_EVAL_ROUNDS
from revtraj.mcts import MctsConfig
from revtraj.revision import TransitionMode


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EvalConfig:
    test_rounds: int = DEFAULT_MAX_ROUNDS
    revision_rounds: int = REVISION_EVAL_ROUNDS


@dataclass(frozen=True)
class RunConfig:
    # env name -> task ids; an empty list selects every task of that env
    envs: dict[str, list[str]] = field(default_factory=lambda: {name: [] for name in ENVIRONMENTS})
    policy: PolicySpec = PolicySpec()
    judge: JudgeSpec = JudgeSpec()
    mcts: MctsConfig = MctsConfig()
    plan: IterationPlan = IterationPlan()
    mix: MixConfig = MixConfig()
    eval: EvalConfig = EvalConfig()
    mode: str = TransitionMode.MODEL_GUIDED.value
    seed: int = 42
    out: str = "runs"
    workers: int = 0  # 0: host parallelism
    max_rounds: int = DEFAULT_MAX_ROUNDS
    max_pairs_per_task: int = 32
    carry_forward: bool = False

    def __post_init__(self):
        unknown = set(self.envs) - set(ENVIRONMENTS)
        if unknown:
            raise ConfigError(f"unknown environments: {sorted(unknown)}")
        if not self.envs:
            raise ConfigError("envs must name at least one environment")
        TransitionMode(self.mode)
        if self.workers < 0 or self.max_rounds < 1 or self.max_pairs_per_task < 1:
            raise ConfigError("workers >= 0, max_rounds >= 1 and max_pairs_per_task >= 1 required")

    def env_tasks(self) -> dict[str, list[str] | None]:
        return {name: (list(tasks) or None) for name, tasks in self.envs.items()}


_NESTED = {"policy": PolicySpec, "judge": JudgeSpec, "mcts": MctsConfig, "mix": MixConfig,
           "eval": EvalConfig}


def config_keys() -> list[str]:
    """Every accepted key, dotted for nested sections."""
    keys = []
    for f in dataclasses.fields(RunConfig):
        if f.name in _NESTED:
            keys += [f"{f.name}.{g.name}" for g in dataclasses.fields(_NESTED[f.name])]
        elif f.name == "plan":
            keys += [f"plan[].{g.name}" for g in dataclasses.fields(IterationSpec) if g.name != "index"]
        else:
            keys.append(f.name)
    return keys


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def from_dict(data: dict[str, Any] | None) -> RunConfig:
    data = dict(data or {})
    kwargs: dict[str, Any] = {}
    top = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - top
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}")
    for name, value in data.items():
        if name in _NESTED:
            kwargs[name] = _build(_NESTED[name], value, name)
        elif name == "plan":
            if not isinstance(value, list) or not value:
                raise ConfigError("plan: expected a non-empty list of iterations")
            specs = []
            for i, item in enumerate(value, 1):
                if isinstance(item, dict) and "index" in item:
                    raise ConfigError("plan: iteration index is positional, drop 'index'")
                specs.append(_build(IterationSpec, {"index": i, **(item or {})}, f"plan[{i}]"))
            try:
                kwargs["plan"] = IterationPlan(tuple(specs))
            except ValueError as exc:
                raise ConfigError(f"plan: {exc}") from exc
        elif name == "envs":
            if isinstance(value, list):
                value = {v: [] for v in value}
            if not isinstance(value, dict):
                raise ConfigError("envs: expected a list of names or a mapping name -> tasks")
            kwargs["envs"] = {k: list(v or []) for k, v in value.items()}
        else:
            kwargs[name] = value
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return from_dict(data)


def override(cfg: RunConfig, **changes: Any) -> RunConfig:
    """Apply non-None overrides; nested fields use ``section__field`` names."""
    top: dict[str, Any] = {}
    nested: dict[str, dict[str, Any]] = {}
    for key, value in changes.items():
        if value is None:
            continue
        if "__" in key:
            section, name = key.split("__", 1)
            nested.setdefault(section, {})[name] = value
        else:
            top[key] = value
    try:
        for section, values in nested.items():
            top[section] = dataclasses.replace(getattr(cfg, section), **values)
        return dataclasses.replace(cfg, **top)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
