"""HTTP client for remote environment servers, plus a reference server handler.

Protocol (JSON over POST, UTF-8)::

    POST /reset {"task_id": ...}            -> {"instruction", "observation", "session"}
    POST /step  {"session": ..., "action"}  -> {"observation", "reward"?, "done"}

Expired sessions are answered with HTTP 404/410 or ``{"error": "session_expired"}``.
The server holds mutable sessions, so this client represents a state by its
action history and re-establishes a session by replaying it when needed. That
requires the server to be deterministic per task id.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, replace
from typing import Any, Callable, Sequence

import httpx

from revtraj.env.base import (
    AlreadyTerminal,
    EnvError,
    EnvState,
    Environment,
    StepResult,
    UnknownTask,
)
from revtraj.traj import Instruction


class SessionExpired(EnvError):
    pass


class EnvUnavailable(EnvError):
    pass


@dataclass(frozen=True)
class RemoteData:
    actions: tuple[str, ...]
    observations: tuple[str, ...]


class HttpEnv(Environment):
    def __init__(
        self,
        base_url: str,
        tasks: Sequence[str],
        name: str = "remote",
        max_rounds: int = 100,
        client: httpx.Client | None = None,
        timeout: float = 30.0,
    ):
        super().__init__(max_rounds)
        self.name = name
        self._tasks = list(tasks)
        self.base_url = base_url.rstrip("/")
        self.client = client or httpx.Client(timeout=timeout)
        self._instructions: dict[str, Instruction] = {}
        self._first_obs: dict[str, str] = {}
        # session id -> action history currently applied on the server
        self._sessions: dict[str, tuple[str, ...]] = {}
        self._session_of: dict[tuple[str, tuple[str, ...]], str] = {}

    def tasks(self) -> list[str]:
        return list(self._tasks)

    def _post(self, path: str, payload: dict) -> dict:
        try:
            resp = self.client.post(f"{self.base_url}{path}", json=payload)
        except httpx.HTTPError as exc:
            raise EnvUnavailable(f"{path}: {exc}") from exc
        if resp.status_code in (404, 410):
            raise SessionExpired(payload.get("session", ""))
        if resp.status_code >= 400:
            raise EnvUnavailable(f"{path}: HTTP {resp.status_code}")
        body = resp.json()
        if body.get("error") == "session_expired":
            raise SessionExpired(payload.get("session", ""))
        if body.get("error") == "unknown_task":
            raise UnknownTask(payload.get("task_id"))
        return body

    def _open(self, task_id: str) -> str:
        body = self._post("/reset", {"task_id": task_id})
        self._instructions[task_id] = Instruction(self.name, task_id, body["instruction"])
        self._first_obs[task_id] = body["observation"]
        self._sessions[body["session"]] = ()
        return body["session"]

    def instruction(self, task_id: str) -> Instruction:
        self._check_task(task_id)
        if task_id not in self._instructions:
            self._open(task_id)
        return self._instructions[task_id]

    def _start(self, task_id: str):
        session = self._open(task_id)
        self._session_of[(task_id, ())] = session
        return RemoteData((), ()), self._first_obs[task_id]

    def _session_for(self, task_id: str, actions: tuple[str, ...]) -> str:
        session = self._session_of.get((task_id, actions))
        if session is not None and self._sessions.get(session) == actions:
            return session
        session = self._open(task_id)
        for a in actions:
            self._post("/step", {"session": session, "action": a})
        self._sessions[session] = actions
        return session

    def _transition(self, task_id: str, data: RemoteData, action: str):
        raise AssertionError("HttpEnv.step talks to the server directly")

    def _score(self, task_id: str, data: Any) -> float:
        # forced stop on a remote env: the server has not ruled, so no credit
        return 0.0

    def step(self, state: EnvState, action: str) -> tuple[EnvState, StepResult]:
        self._own(state)
        if state.done:
            raise AlreadyTerminal(f"task {state.task_id} already finished")
        action = action.strip()
        data: RemoteData = state.data
        for attempt in range(2):
            session = self._session_for(state.task_id, data.actions)
            try:
                body = self._post("/step", {"session": session, "action": action})
                break
            except SessionExpired:
                self._sessions.pop(session, None)
                if attempt:
                    raise
        actions = data.actions + (action,)
        self._sessions[session] = actions
        self._session_of.pop((state.task_id, data.actions), None)
        self._session_of[(state.task_id, actions)] = session
        count = state.step_count + 1
        done = bool(body["done"]) or count >= state.max_rounds
        reward = body.get("reward")
        if done and reward is None:
            reward = 0.0
        new_data = RemoteData(actions, data.observations + (body["observation"],))
        new = replace(state, step_count=count, done=done,
                      reward=float(reward) if done else None, data=new_data)
        return new, StepResult(body["observation"], new.reward, done)


def make_server(env: Environment) -> Callable[[httpx.Request], httpx.Response]:
    """Serve a local environment over the protocol above (an httpx transport handler)."""
    sessions: dict[str, Any] = {}
    counter = itertools.count()

    def handler(request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.content or b"{}")
        if request.url.path.endswith("/reset"):
            try:
                instruction, state, obs = env.reset(payload["task_id"])
            except UnknownTask:
                return httpx.Response(200, json={"error": "unknown_task"})
            sid = f"s{next(counter)}"
            sessions[sid] = state
            return httpx.Response(200, json={"instruction": instruction.text,
                                             "observation": obs, "session": sid})
        if request.url.path.endswith("/step"):
            state = sessions.get(payload.get("session"))
            if state is None:
                return httpx.Response(410, json={"error": "session_expired"})
            state, result = env.step(state, payload["action"])
            sessions[payload["session"]] = state
            body = {"observation": result.observation, "done": result.done}
            if result.done:
                body["reward"] = result.reward
            return httpx.Response(200, json=body)
        return httpx.Response(404, json={"error": "not_found"})

    handler.sessions = sessions  # type: ignore[attr-defined]
    return handler
