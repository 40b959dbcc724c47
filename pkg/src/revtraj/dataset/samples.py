"""Chat-format training samples with per-message loss masks, and JSONL IO."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Union

from revtraj.traj import RevisionSignal, RevisionTrajectory, Trajectory

HUMAN = "human"
ASSISTANT = "assistant"
KINDS = ("good", "revision", "general")

_ROLE_ALIASES = {"human": HUMAN, "user": HUMAN, "assistant": ASSISTANT, "gpt": ASSISTANT}


class RenderError(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


@dataclass(frozen=True)
class Message:
    role: str
    content: str
    train: bool = False

    def __post_init__(self):
        if self.role not in (HUMAN, ASSISTANT):
            raise ValueError(f"unknown role {self.role!r}")
        if self.train and self.role != ASSISTANT:
            raise ValueError("only assistant messages can be trainable")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content, "train": self.train}


@dataclass(frozen=True)
class DatasetSample:
    id: str
    kind: str
    messages: tuple[Message, ...]
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if self.kind not in KINDS:
            raise ValueError(f"unknown sample kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "messages": [m.to_dict() for m in self.messages],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSample":
        return cls(
            id=d["id"],
            kind=d["kind"],
            messages=tuple(Message(m["role"], m["content"], bool(m["train"])) for m in d["messages"]),
            meta=dict(d.get("meta", {})),
        )


def sample_id(kind: str, messages: Iterable[Message], meta: dict) -> str:
    payload = json.dumps([kind, [m.to_dict() for m in messages], meta], sort_keys=True,
                         ensure_ascii=False)
    return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:16]


def _first_turn(traj: Trajectory) -> Message:
    text = traj.instruction.text
    if traj.initial_observation:
        text += "\n" + traj.initial_observation
    return Message(HUMAN, text, False)


def render_sample(t: Union[Trajectory, RevisionTrajectory], iteration: int | None = None) -> DatasetSample:
    """Render a good or revision trajectory as a masked chat sample.

    Revision samples train only on the revision thought and the good-suffix
    actions; the bad prefix is context. Human turns never train.
    """
    if isinstance(t, RevisionTrajectory):
        return _render_revision(t, iteration)
    if not isinstance(t, Trajectory):
        raise RenderError(f"cannot render {type(t).__name__}")
    if not t.terminal or not t.steps:
        raise RenderError("only terminal, non-empty trajectories can be rendered")
    msgs = [_first_turn(t)]
    for step in t.steps:
        msgs.append(Message(ASSISTANT, step.assistant_text(), True))
        msgs.append(Message(HUMAN, step.observation, False))
    meta = {
        "env": t.instruction.env_name,
        "task_id": t.instruction.task_id,
        "iteration": iteration,
        "reward": t.reward,
        "optimal": t.reward == 1,
    }
    return DatasetSample(sample_id("good", msgs, meta), "good", tuple(msgs), meta)


def _render_revision(r: RevisionTrajectory, iteration: int | None) -> DatasetSample:
    if not r.steps:
        raise RenderError("empty revision trajectory")
    msgs = [_first_turn(r.pair.bad)]
    after_signal = False
    for item in r.steps:
        if isinstance(item, RevisionSignal):
            msgs.append(Message(ASSISTANT, item.assistant_text, True))
            msgs.append(Message(HUMAN, item.human_ack, False))
            after_signal = True
        else:
            msgs.append(Message(ASSISTANT, item.assistant_text(), after_signal))
            msgs.append(Message(HUMAN, item.observation, False))
    meta = {
        "env": r.instruction.env_name,
        "task_id": r.instruction.task_id,
        "iteration": iteration,
        "reward": r.reward,
        "divergence": r.divergence,
        "transition": r.transition,
        "thought_index": r.signal.thought_index,
        "source": r.source.value,
    }
    return DatasetSample(sample_id("revision", msgs, meta), "revision", tuple(msgs), meta)


def general_sample(messages: list[dict], meta: dict | None = None) -> DatasetSample:
    msgs = []
    for m in messages:
        role = _ROLE_ALIASES.get(m.get("role") or m.get("from"))
        if role is None:
            raise ValueError(f"unknown role in general sample: {m}")
        content = m.get("content", m.get("value", ""))
        train = bool(m.get("train", role == ASSISTANT)) and role == ASSISTANT
        msgs.append(Message(role, content, train))
    meta = dict(meta or {})
    return DatasetSample(sample_id("general", msgs, meta), "general", tuple(msgs), meta)


def load_general(path: str | os.PathLike) -> list[DatasetSample]:
    """Chat JSONL: one ``{"messages": [...]}`` object per line."""
    out = []
    for lineno, obj in _iter_json_lines(path):
        try:
            out.append(general_sample(obj["messages"], obj.get("meta")))
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(path, lineno, str(exc)) from exc
    return out


def _iter_json_lines(path):
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, f"malformed JSON: {exc.msg}") from exc


def write_records(records: Iterable[dict], path: str | os.PathLike) -> int:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        n = 0
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
                n += 1
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return n


def read_records(path: str | os.PathLike) -> list[dict]:
    return [obj for _, obj in _iter_json_lines(path)]


def write_jsonl(dataset: Iterable[DatasetSample], path: str | os.PathLike) -> int:
    return write_records((s.to_dict() for s in dataset), path)


def read_jsonl(path: str | os.PathLike) -> list[DatasetSample]:
    out = []
    for lineno, obj in _iter_json_lines(path):
        try:
            out.append(DatasetSample.from_dict(obj))
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(path, lineno, f"bad sample: {exc}") from exc
    return out
