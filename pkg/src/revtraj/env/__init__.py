from revtraj.env.base import (
    DEFAULT_MAX_ROUNDS,
    INVALID_PREFIX,
    REVISION_EVAL_ROUNDS,
    AlreadyTerminal,
    EnvError,
    EnvState,
    Environment,
    InvalidSnapshot,
    Snapshot,
    StepResult,
    UnknownTask,
)
from revtraj.env.craft import CraftEnv, CraftSpec, load_craft_specs
from revtraj.env.graded import GradedPathEnv, GradedPathSpec, load_graded_specs

ENVIRONMENTS = {"craft": CraftEnv, "graded": GradedPathEnv}


def make_env(name: str, max_rounds: int = DEFAULT_MAX_ROUNDS) -> Environment:
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    return cls(max_rounds=max_rounds)


__all__ = [
    "DEFAULT_MAX_ROUNDS", "INVALID_PREFIX", "REVISION_EVAL_ROUNDS", "AlreadyTerminal", "EnvError",
    "EnvState", "Environment", "InvalidSnapshot", "Snapshot", "StepResult", "UnknownTask",
    "CraftEnv", "CraftSpec", "load_craft_specs", "GradedPathEnv", "GradedPathSpec",
    "load_graded_specs", "ENVIRONMENTS", "make_env",
]
