"""Versioned resource files bundled with the package."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

JUDGE_PROMPT = "judge_prompt_v1.txt"
THOUGHTS = "revision_thoughts.json"
CRAFT_TASKS = "craft_tasks_v1.json"
GRADED_TASKS = "graded_tasks_v1.json"


def read_text(name: str) -> str:
    return resources.files("revtraj.data").joinpath(name).read_text(encoding="utf-8")


def read_json(name: str) -> dict:
    return json.loads(read_text(name))


@lru_cache(maxsize=None)
def revision_thoughts() -> tuple[str, ...]:
    return tuple(read_json(THOUGHTS)["thoughts"])


@lru_cache(maxsize=None)
def judge_template() -> str:
    return read_text(JUDGE_PROMPT)
