"""Generation backends: a deterministic scripted replayer for offline runs
and a wire client speaking the chat-completions protocol.

Every consumer tags its requests ("user", "assistant", "function", "exec",
"judge", "memory", "similarity", "model_checker"); the scripted backend
replays a canned list of replies per tag, which makes whole pipeline runs
reproducible byte for byte.
"""

from __future__ import annotations

import json
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Protocol

import httpx

from .errors import (
    AuthError,
    BackendError,
    BackendTimeout,
    ConfigError,
    ParseError,
    RateLimited,
    SchemaError,
    ScriptExhausted,
)

ROLES = ("system", "user", "assistant", "tool")
API_KEY_ENV = "FUNCFORGE_API_KEY"


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"invalid message role: {self.role!r}")
        if not self.content and self.role != "assistant":
            raise ValueError(f"empty content only allowed for assistant placeholders, not {self.role!r}")


@dataclass(frozen=True)
class GenerationRequest:
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int = 512
    tag: str = "default"
    seed: int | None = None

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("request needs at least one message")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens <= 0:
            raise ValueError(f"max_tokens must be > 0, got {self.max_tokens}")
        if self.tag == "similarity" and self.temperature != 0.0:
            raise ValueError("similarity scoring must run at temperature 0")


@dataclass(frozen=True)
class GenerationResponse:
    content: str
    finish_reason: str = "stop"
    usage: dict[str, int] | None = None


class Backend(Protocol):
    def complete(self, request: GenerationRequest) -> GenerationResponse: ...


def request_to_wire(request: GenerationRequest, model: str) -> dict[str, Any]:
    """Chat-completions request body for a generation request."""
    body: dict[str, Any] = {
        "model": model,
        "messages": [{"role": m.role, "content": m.content} for m in request.messages],
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    }
    if request.seed is not None:
        body["seed"] = request.seed
    return body


def request_from_wire(body: dict[str, Any], tag: str = "default") -> GenerationRequest:
    """Inverse of request_to_wire; used to round-trip logged requests."""
    try:
        messages = tuple(ChatMessage(role=m["role"], content=m["content"]) for m in body["messages"])
        return GenerationRequest(
            messages=messages,
            temperature=body["temperature"],
            max_tokens=body["max_tokens"],
            tag=tag,
            seed=body.get("seed"),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed wire request body: {exc}") from exc


def response_from_wire(payload: dict[str, Any]) -> GenerationResponse:
    try:
        choice = payload["choices"][0]
        return GenerationResponse(
            content=choice["message"]["content"],
            finish_reason=choice.get("finish_reason", "stop"),
            usage=payload.get("usage"),
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise BackendError(f"malformed chat-completions response: {exc}") from exc


class ScriptedBackend:
    """Replays canned replies keyed by (tag, per-tag call counter).

    The script is a JSON object mapping tag -> list of reply strings.
    Counter increments are serialized, so concurrent callers with distinct
    tags stay deterministic; callers must not assume ordering between tags.
    """

    def __init__(self, script: dict[str, list[str]]):
        for tag, entries in script.items():
            if not isinstance(entries, list) or not all(isinstance(e, str) for e in entries):
                raise SchemaError(f"script tag '{tag}' must map to a list of strings")
        self._script = script
        self._counters: dict[str, int] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ParseError(f"cannot read script file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ParseError(f"script file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise SchemaError("script file must contain a JSON object of tag -> replies")
        return cls(raw)

    @property
    def counters(self) -> dict[str, int]:
        """Calls served so far, per tag."""
        with self._lock:
            return dict(self._counters)

    def complete(self, request: GenerationRequest) -> GenerationResponse:
        with self._lock:
            index = self._counters.get(request.tag, 0)
            self._counters[request.tag] = index + 1
            entries = self._script.get(request.tag, [])
            if index >= len(entries):
                raise ScriptExhausted(
                    f"script has {len(entries)} replies for tag '{request.tag}', call #{index + 1} requested"
                )
            return GenerationResponse(content=entries[index])


class WireBackend:
    """Chat-completions client with exponential-backoff retries.

    Credentials come from the FUNCFORGE_API_KEY environment variable.
    Transient failures (timeouts, 429, 5xx) are retried up to ``retries``
    times with 0.5s * 2^k backoff plus jitter; credential rejections are
    never retried.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        retries: int = 3,
        timeout: float = 30.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.retries = retries
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._client = httpx.Client(base_url=self.endpoint, timeout=timeout, transport=transport)
        self.metrics: dict[str, int] = {"calls": 0, "retries": 0, "errors": 0}

    def close(self) -> None:
        self._client.close()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, request: GenerationRequest) -> GenerationResponse:
        body = request_to_wire(request, self.model)
        self.metrics["calls"] += 1
        last_error: BackendError | None = None
        for attempt in range(self.retries + 1):
            if attempt > 0:
                self.metrics["retries"] += 1
                backoff = 0.5 * 2 ** (attempt - 1)
                self._sleep(backoff + self._rng.uniform(0, 0.25))
            try:
                response = self._client.post("/chat/completions", json=body, headers=self._headers())
            except httpx.TimeoutException as exc:
                last_error = BackendTimeout(f"request timed out: {exc}")
                continue
            except httpx.TransportError as exc:
                last_error = BackendError(f"transport failure: {exc}")
                continue
            if response.status_code in (401, 403):
                self.metrics["errors"] += 1
                raise AuthError(f"credential rejected with HTTP {response.status_code}")
            if response.status_code == 429:
                last_error = RateLimited("rate limited (HTTP 429)")
                continue
            if response.status_code >= 500:
                last_error = BackendError(f"server error (HTTP {response.status_code})")
                continue
            if response.status_code != 200:
                self.metrics["errors"] += 1
                raise BackendError(f"unexpected HTTP {response.status_code}: {response.text[:200]}")
            try:
                payload = response.json()
            except json.JSONDecodeError as exc:
                self.metrics["errors"] += 1
                raise BackendError(f"response body is not JSON: {exc}") from exc
            return response_from_wire(payload)
        self.metrics["errors"] += 1
        assert last_error is not None
        raise last_error


def build_backend(
    scripted_path: str | Path | None,
    endpoint: str | None,
    model: str | None,
    retries: int = 3,
) -> Backend:
    """Pick the backend for a run: a script file wins over a wire endpoint."""
    if scripted_path is not None:
        return ScriptedBackend.from_file(scripted_path)
    if endpoint and model:
        return WireBackend(endpoint=endpoint, model=model, retries=retries)
    raise ConfigError("backend config needs either a script file or endpoint + model")
