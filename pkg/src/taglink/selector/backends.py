"""LLM backends: an OpenAI-style chat-completion client and a scripted mock."""

from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Mapping, Protocol

import httpx

from ..records import iter_jsonl
from .templates import Prompt

log = logging.getLogger(__name__)

BACKEND_KINDS = ("remote_chat", "local_server", "scripted_mock")
MOCK_MODES = ("oracle", "zero", "fixture")


class BackendError(RuntimeError):
    """The backend gave no usable reply, after retries where applicable."""


@dataclass
class BackendConfig:
    kind: str = "scripted_mock"
    model: str = "mock"
    endpoint: str | None = None
    temperature: float = 0.0
    max_parallel: int = 4
    max_attempts: int = 3
    backoff_s: float = 1.0
    timeout_s: float = 60.0
    max_tokens: int = 16
    # USD per 1M input / output tokens
    price_in: float = 0.0
    price_out: float = 0.0
    credential_env: str | None = "OPENAI_API_KEY"
    mock_mode: str = "oracle"
    mock_fixture: str | None = None

    @classmethod
    def from_dict(cls, data: Mapping) -> "BackendConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown backend option(s): {', '.join(unknown)}")
        return cls(**dict(data))

    def to_dict(self) -> dict:
        return asdict(self)

    def violations(self) -> list[str]:
        out = []
        if self.kind not in BACKEND_KINDS:
            out.append(f"backend kind must be one of {BACKEND_KINDS}")
        if self.temperature != 0:
            out.append("temperature must be 0")
        if self.price_in < 0 or self.price_out < 0:
            out.append("prices must be non-negative")
        if self.max_parallel < 1:
            out.append("max_parallel must be >= 1")
        if self.max_attempts < 1:
            out.append("max_attempts must be >= 1")
        if self.kind in ("remote_chat", "local_server") and not self.endpoint:
            out.append(f"{self.kind} backend needs an endpoint")
        if self.kind == "scripted_mock":
            if self.mock_mode not in MOCK_MODES:
                out.append(f"mock_mode must be one of {MOCK_MODES}")
            if self.mock_mode == "fixture" and not self.mock_fixture:
                out.append("fixture mock needs mock_fixture")
        return out

    @property
    def cost_kind(self) -> str:
        return "local" if self.kind == "local_server" else "remote"


@dataclass(frozen=True)
class Completion:
    text: str
    input_tokens: int | None = None
    output_tokens: int | None = None
    tokens_estimated: bool = False
    duration_s: float | None = None


def estimate_tokens(text: str) -> int:
    """Rough token count: non-whitespace characters divided by four, rounded up."""
    return math.ceil(sum(1 for ch in text if not ch.isspace()) / 4)


class Backend(Protocol):
    max_parallel: int

    def complete(self, prompt: Prompt) -> Completion: ...


class ScriptedMockBackend:
    """Deterministic stand-in for an LLM.

    ``oracle`` answers with the position of the true actor (or 0), ``zero``
    always answers 0, ``fixture`` replays recorded replies keyed by tag id.
    """

    max_parallel = 1

    def __init__(self, mode: str = "oracle", *, truth: Mapping[str, str | None] | None = None,
                 responses: Mapping[str, str | dict] | None = None):
        if mode not in MOCK_MODES:
            raise ValueError(f"unknown mock mode {mode!r}")
        if mode == "oracle" and truth is None:
            raise ValueError("oracle mock needs ground truth")
        if mode == "fixture" and responses is None:
            raise ValueError("fixture mock needs responses")
        self.mode = mode
        self.truth = dict(truth or {})
        self.responses = dict(responses or {})

    @classmethod
    def from_fixture(cls, path: str | Path) -> "ScriptedMockBackend":
        responses = {}
        for _, rec in iter_jsonl(path):
            responses[str(rec["tag_id"])] = rec
        return cls("fixture", responses=responses)

    def complete(self, prompt: Prompt) -> Completion:
        in_tokens = None
        out_tokens = None
        if self.mode == "zero":
            text = "0"
        elif self.mode == "oracle":
            true_actor = self.truth.get(prompt.tag_id)
            ids = list(prompt.candidate_ids)
            text = str(ids.index(true_actor) + 1) if true_actor in ids else "0"
        else:
            try:
                rec = self.responses[prompt.tag_id]
            except KeyError:
                raise BackendError(f"no recorded response for tag {prompt.tag_id!r}") from None
            if isinstance(rec, dict):
                text = str(rec.get("response", ""))
                in_tokens = rec.get("input_tokens")
                out_tokens = rec.get("output_tokens")
            else:
                text = str(rec)
        estimated = in_tokens is None or out_tokens is None
        if estimated:
            in_tokens = estimate_tokens(prompt.text)
            out_tokens = estimate_tokens(text)
        return Completion(text, int(in_tokens), int(out_tokens), estimated, None)


def _is_transient(status: int) -> bool:
    return status == 429 or status >= 500


class ChatCompletionBackend:
    """Client for an OpenAI-compatible ``/chat/completions`` endpoint.

    Used for hosted models and for local OpenAI-compatible servers alike.
    Transport errors, 429 and 5xx responses are retried with exponential
    backoff; other HTTP errors fail immediately.
    """

    def __init__(self, config: BackendConfig, *, transport: httpx.BaseTransport | None = None,
                 sleep=time.sleep):
        if not config.endpoint:
            raise ValueError("chat backend needs an endpoint")
        self.config = config
        self.max_parallel = config.max_parallel
        url = config.endpoint.rstrip("/")
        if not url.endswith("/chat/completions"):
            url += "/chat/completions"
        self.url = url
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(config.credential_env) if config.credential_env else None
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(headers=headers, timeout=config.timeout_s, transport=transport)
        self._sleep = sleep

    def close(self) -> None:
        self._client.close()

    def _payload(self, prompt: Prompt) -> dict:
        return {
            "model": self.config.model,
            "messages": prompt.messages(),
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }

    def complete(self, prompt: Prompt) -> Completion:
        payload = self._payload(prompt)
        last_error = "no attempt made"
        for attempt in range(self.config.max_attempts):
            if attempt:
                self._sleep(self.config.backoff_s * 2 ** (attempt - 1))
            start = time.perf_counter()
            try:
                resp = self._client.post(self.url, json=payload)
            except httpx.TransportError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                log.warning("request for %s failed (%s), attempt %d", prompt.tag_id, last_error, attempt + 1)
                continue
            elapsed = time.perf_counter() - start
            if _is_transient(resp.status_code):
                last_error = f"HTTP {resp.status_code}"
                log.warning("request for %s got %s, attempt %d", prompt.tag_id, last_error, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return self._completion(resp.json(), prompt, elapsed)
        raise BackendError(f"giving up after {self.config.max_attempts} attempt(s): {last_error}")

    @staticmethod
    def _completion(body: dict, prompt: Prompt, elapsed: float) -> Completion:
        try:
            text = body["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError):
            raise BackendError("malformed chat-completion response") from None
        usage = body.get("usage") or {}
        pt, ct = usage.get("prompt_tokens"), usage.get("completion_tokens")
        if pt is None or ct is None:
            return Completion(text, estimate_tokens(prompt.text), estimate_tokens(text), True, elapsed)
        return Completion(text, int(pt), int(ct), False, elapsed)


def make_backend(config: BackendConfig, *, truth: Mapping[str, str | None] | None = None,
                 transport: httpx.BaseTransport | None = None) -> Backend:
    problems = config.violations()
    if problems:
        raise ValueError("; ".join(problems))
    if config.kind == "scripted_mock":
        if config.mock_mode == "fixture":
            return ScriptedMockBackend.from_fixture(config.mock_fixture)
        return ScriptedMockBackend(config.mock_mode, truth=truth)
    return ChatCompletionBackend(config, transport=transport)
