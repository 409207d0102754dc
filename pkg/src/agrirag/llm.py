"""Chat-completion providers: remote HTTP clients plus deterministic local
mocks (echo and extractive) so the whole pipeline runs without a real model."""

from __future__ import annotations

import math
import os
import re
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING

import httpx

if TYPE_CHECKING:
    from .rag import Prompt

MOCK_ECHO = "mock-echo"
MOCK_EXTRACTIVE = "mock-extractive"

RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY_S = 0.25


class LlmError(Exception):
    def __init__(self, message: str, retryable: bool = False, status: int | None = None):
        super().__init__(message)
        self.retryable = retryable
        self.status = status


@dataclass
class LlmProviderConfig:
    provider_id: str
    endpoint: str = MOCK_EXTRACTIVE
    model_name: str = "mock"
    auth_env: str | None = None
    timeout_ms: int = 60_000
    max_output_tokens: int = 1024

    def __post_init__(self) -> None:
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")


@dataclass(frozen=True)
class Completion:
    text: str
    provider_id: str
    latency_ms: int
    token_estimate: int


_SENTENCE_END = re.compile(r"[.!?]")


def first_sentence(text: str) -> str:
    """Everything up to and including the first '.', '!' or '?'."""
    m = _SENTENCE_END.search(text)
    if m is None:
        return text.strip()
    return text[: m.end()].strip()


def _estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


@dataclass
class LlmClient:
    config: LlmProviderConfig

    @property
    def provider_id(self) -> str:
        return self.config.provider_id

    def complete(self, prompt: "Prompt") -> Completion:
        if not prompt.query:
            raise LlmError("prompt query must be non-empty")
        start = time.monotonic()
        endpoint = self.config.endpoint
        if endpoint == MOCK_ECHO:
            text = f"ECHO: {prompt.query}"
        elif endpoint == MOCK_EXTRACTIVE:
            if prompt.context_blocks:
                text = first_sentence(prompt.context_blocks[0].text)
            else:
                text = "NO CONTEXT"
        else:
            text = self._request_remote(prompt)
        if not text:
            raise LlmError("provider returned an empty completion")
        latency_ms = int((time.monotonic() - start) * 1000)
        return Completion(
            text=text,
            provider_id=self.config.provider_id,
            latency_ms=latency_ms,
            token_estimate=_estimate_tokens(text),
        )

    def _request_remote(self, prompt: "Prompt") -> str:
        headers = {}
        if self.config.auth_env:
            secret = os.environ.get(self.config.auth_env)
            if not secret:
                raise LlmError(f"auth env var {self.config.auth_env!r} is not set")
            headers["Authorization"] = f"Bearer {secret}"
        payload = {
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.render_user_message()},
            ],
            "max_tokens": self.config.max_output_tokens,
        }
        last_error: LlmError | None = None
        for attempt in range(RETRY_ATTEMPTS):
            if attempt:
                time.sleep(RETRY_BASE_DELAY_S * 2 ** (attempt - 1))
            try:
                resp = httpx.post(
                    self.config.endpoint,
                    json=payload,
                    headers=headers,
                    timeout=self.config.timeout_ms / 1000,
                )
            except httpx.HTTPError as exc:
                last_error = LlmError(f"completion request failed: {exc}", retryable=True)
                continue
            if resp.status_code >= 500:
                last_error = LlmError(
                    f"completion provider error {resp.status_code}",
                    retryable=True,
                    status=resp.status_code,
                )
                continue
            if resp.status_code != 200:
                raise LlmError(
                    f"completion provider error {resp.status_code}",
                    status=resp.status_code,
                )
            return resp.json()["choices"][0]["message"]["content"]
        assert last_error is not None
        raise last_error
