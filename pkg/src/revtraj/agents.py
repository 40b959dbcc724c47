"""Picklable descriptions of policies and judges, built per worker."""

from __future__ import annotations

from dataclasses import dataclass

from revtraj.chat import ChatClient
from revtraj.env import Environment
from revtraj.judge import ConstantJudge, Judge, Label, OracleJudge, RemoteJudge
from revtraj.policy import Policy, RandomPolicy, RemotePolicy, ScriptedOracle

POLICY_KINDS = ("oracle", "random", "remote")
JUDGE_KINDS = ("oracle", "remote", "all_good")


@dataclass(frozen=True)
class PolicySpec:
    kind: str = "oracle"
    epsilon: float = 0.3
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str = "REVTRAJ_API_KEY"

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"policy kind must be one of {POLICY_KINDS}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote policy needs an endpoint")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")


@dataclass(frozen=True)
class JudgeSpec:
    kind: str = "oracle"
    endpoint: str | None = None
    model: str | None = None
    votes: int = 1
    api_key_env: str = "REVTRAJ_API_KEY"

    def __post_init__(self):
        if self.kind not in JUDGE_KINDS:
            raise ValueError(f"judge kind must be one of {JUDGE_KINDS}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote judge needs an endpoint")
        if self.votes < 1:
            raise ValueError("votes must be >= 1")


def build_policy(spec: PolicySpec, env: Environment, seed: int | str) -> Policy:
    if spec.kind == "oracle":
        return ScriptedOracle(env, spec.epsilon, seed)
    if spec.kind == "random":
        return RandomPolicy(env, seed)
    return RemotePolicy(ChatClient(spec.endpoint, spec.model, api_key_env=spec.api_key_env))


def build_judge(spec: JudgeSpec, env: Environment) -> Judge:
    if spec.kind == "oracle":
        return OracleJudge(env)
    if spec.kind == "all_good":
        return ConstantJudge(Label.GOOD)
    return RemoteJudge(ChatClient(spec.endpoint, spec.model, api_key_env=spec.api_key_env),
                       votes=spec.votes)
