"""Minimal client for chat-completions-style HTTP endpoints.

Request body: ``{"messages": [{"role", "content"}], "n", "temperature", "stop"}``
(plus ``"model"`` when configured). Response body: ``{"choices": [{"text"}]}``;
OpenAI-style ``choices[i].message.content`` is accepted too.
"""

from __future__ import annotations

import logging
import os
import time

import httpx

log = logging.getLogger(__name__)

RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class ChatUnavailable(Exception):
    pass


class ChatClient:
    def __init__(
        self,
        endpoint: str,
        model: str | None = None,
        api_key: str | None = None,
        api_key_env: str = "REVTRAJ_API_KEY",
        client: httpx.Client | None = None,
        timeout: float = 60.0,
        retries: int = 2,
        backoff: float = 0.5,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(api_key_env)
        self.client = client or httpx.Client(timeout=timeout)
        self.retries = retries
        self.backoff = backoff

    def complete(
        self,
        messages: list[dict],
        n: int = 1,
        temperature: float = 1.0,
        stop: list[str] | None = None,
    ) -> list[str]:
        payload: dict = {"messages": messages, "n": n, "temperature": temperature}
        if stop:
            payload["stop"] = stop
        if self.model:
            payload["model"] = self.model
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}

        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self.client.post(self.endpoint, json=payload, headers=headers)
                if resp.status_code in RETRYABLE_STATUS:
                    raise httpx.HTTPStatusError(f"HTTP {resp.status_code}", request=resp.request,
                                                response=resp)
                resp.raise_for_status()
                return [_choice_text(c) for c in resp.json()["choices"]]
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                last = exc
                log.warning("chat request to %s failed (attempt %d): %s", self.endpoint, attempt + 1, exc)
                if (isinstance(exc, httpx.HTTPStatusError)
                        and exc.response.status_code not in RETRYABLE_STATUS):
                    break
                if attempt < self.retries and self.backoff:
                    time.sleep(self.backoff * 2**attempt)
        raise ChatUnavailable(f"{self.endpoint}: {last}") from last


def _choice_text(choice: dict) -> str:
    if "text" in choice:
        return choice["text"]
    return choice["message"]["content"]
