"""Uniform completion interface: a real HTTP provider and a deterministic
replay provider for offline runs and tests.

The HTTP provider posts a completions-style JSON body (prompt in, text out);
a ``chat`` flag switches to the chat wire format. Credentials come only from
the environment variable named in the settings, never from config values.

Replay scripts are JSON lists of ``{"match_substring"?: str, "response": str}``.
Each request consumes the first pending entry whose ``match_substring`` occurs
in the prompt; entries without a match key are consumed in order.
"""

from __future__ import annotations

import json
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path


class ProviderError(RuntimeError):
    """Base class for completion-provider failures."""


class ProviderConfigError(ProviderError):
    """Missing or unusable provider settings."""


class AuthenticationError(ProviderError):
    """The endpoint rejected the credential (HTTP 401/403)."""


class RequestTooLargeError(ProviderError):
    """The endpoint rejected the request size (HTTP 413); never silently truncated."""


class ExhaustedRetriesError(ProviderError):
    """All attempts failed; carries the last HTTP status (None for transport errors)."""

    def __init__(self, message: str, last_status: int | None):
        super().__init__(message)
        self.last_status = last_status


class ReplayExhaustedError(ProviderError):
    """A request arrived with no pending replay entry to serve it."""


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int = 1024
    temperature: float = 0.0
    stop: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be nonempty")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    provider_id: str
    latency_ms: int
    attempt_count: int


@dataclass
class TransportResponse:
    status: int
    headers: dict
    text: str


def _requests_transport(url: str, headers: dict, payload: dict, timeout: float) -> TransportResponse:
    import requests

    try:
        resp = requests.post(url, headers=headers, json=payload, timeout=timeout)
    except requests.RequestException as e:
        raise ConnectionError(str(e)) from e
    return TransportResponse(status=resp.status_code, headers=dict(resp.headers), text=resp.text)


class HttpProvider:
    """Completions over HTTP with exponential backoff and a permit limit.

    Retries transport failures, 429 and 5xx with backoff (base 1s, factor 2,
    10% jitter); 429 honors a numeric Retry-After header. Authentication and
    request-size rejections fail immediately.
    """

    def __init__(self, endpoint: str, model: str, credential_env: str,
                 chat: bool = False, max_attempts: int = 5, permits: int = 4,
                 timeout: float = 60.0, backoff_base: float = 1.0,
                 transport=None, sleep=time.sleep, rng: random.Random | None = None):
        if credential_env not in os.environ:
            raise ProviderConfigError(f"credential environment variable {credential_env!r} is not set")
        self.endpoint = endpoint
        self.model = model
        self.credential_env = credential_env
        self.chat = chat
        self.max_attempts = max_attempts
        self.timeout = timeout
        self.backoff_base = backoff_base
        self.provider_id = model
        self._transport = transport or _requests_transport
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._permits = threading.Semaphore(permits)
        self._probe_lock = threading.Lock()
        self._in_flight = 0
        self.max_in_flight = 0  # test probe: peak concurrent transport calls

    def _payload(self, request: CompletionRequest) -> dict:
        body = {
            "model": self.model,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        if request.stop:
            body["stop"] = list(request.stop)
        if self.chat:
            body["messages"] = [{"role": "user", "content": request.prompt}]
        else:
            body["prompt"] = request.prompt
        return body

    def _extract_text(self, body_text: str) -> str:
        try:
            body = json.loads(body_text)
            choice = body["choices"][0]
            return choice["message"]["content"] if self.chat else choice["text"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as e:
            raise ProviderError(f"malformed provider response: {e}") from e

    def complete(self, request: CompletionRequest) -> CompletionResult:
        headers = {
            "Authorization": f"Bearer {os.environ[self.credential_env]}",
            "Content-Type": "application/json",
        }
        payload = self._payload(request)
        started = time.monotonic()
        last_status = None
        last_error = "no attempt made"
        for attempt in range(1, self.max_attempts + 1):
            try:
                with self._permits:
                    with self._probe_lock:
                        self._in_flight += 1
                        self.max_in_flight = max(self.max_in_flight, self._in_flight)
                    try:
                        resp = self._transport(self.endpoint, headers, payload, self.timeout)
                    finally:
                        with self._probe_lock:
                            self._in_flight -= 1
            except ConnectionError as e:
                last_status, last_error = None, str(e)
                self._backoff(attempt, None)
                continue

            if resp.status == 200:
                latency_ms = int((time.monotonic() - started) * 1000)
                return CompletionResult(text=self._extract_text(resp.text),
                                        provider_id=self.provider_id,
                                        latency_ms=latency_ms, attempt_count=attempt)
            if resp.status in (401, 403):
                raise AuthenticationError(f"authentication failed (HTTP {resp.status})")
            if resp.status == 413:
                raise RequestTooLargeError("request too large for the endpoint (HTTP 413)")
            if resp.status == 429 or resp.status >= 500:
                last_status, last_error = resp.status, f"HTTP {resp.status}"
                self._backoff(attempt, resp.headers.get("Retry-After"))
                continue
            raise ProviderError(f"unexpected HTTP {resp.status}: {resp.text[:200]}")

        raise ExhaustedRetriesError(
            f"gave up after {self.max_attempts} attempts (last: {last_error})", last_status)

    def _backoff(self, attempt: int, retry_after) -> None:
        if attempt >= self.max_attempts:
            return
        if retry_after is not None:
            try:
                self._sleep(float(retry_after))
                return
            except (TypeError, ValueError):
                pass
        delay = self.backoff_base * (2 ** (attempt - 1))
        self._sleep(delay * (1.0 + 0.1 * self._rng.random()))


@dataclass
class ReplayEntry:
    response: str
    match_substring: str | None = None


class ReplayProvider:
    """Serves scripted responses; deterministic and offline.

    Thread safe: matching and consumption happen under one lock, and because
    requests for one record arrive sequentially while distinct records carry
    distinct match substrings, output is independent of request interleaving.
    """

    provider_id = "replay"

    def __init__(self, entries: list[ReplayEntry]):
        self._entries = list(entries)
        self._lock = threading.Lock()
        self.max_in_flight = 1

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayProvider":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ProviderConfigError(f"cannot read replay script {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ProviderConfigError(f"replay script {path} is not valid JSON: {e}") from e
        if not isinstance(raw, list):
            raise ProviderConfigError("replay script must be a JSON list")
        entries = []
        for i, item in enumerate(raw):
            if not isinstance(item, dict) or "response" not in item:
                raise ProviderConfigError(f"replay entry {i} needs a 'response' field")
            entries.append(ReplayEntry(response=item["response"],
                                       match_substring=item.get("match_substring")))
        return cls(entries)

    def complete(self, request: CompletionRequest) -> CompletionResult:
        with self._lock:
            for i, entry in enumerate(self._entries):
                if entry.match_substring is None or entry.match_substring in request.prompt:
                    self._entries.pop(i)
                    return CompletionResult(text=entry.response, provider_id=self.provider_id,
                                            latency_ms=0, attempt_count=1)
        raise ReplayExhaustedError("no pending replay entry matches the request")

    @property
    def pending(self) -> int:
        with self._lock:
            return len(self._entries)


def configure_provider(kind: str, settings: dict):
    """Build an immutable provider handle from validated settings.

    ``http`` needs ``endpoint``, ``model`` and ``credential_env``; optional
    keys: ``chat``, ``max_attempts``, ``permits``, ``timeout``.
    ``replay`` needs ``script`` (path to the replay file).
    """
    if kind == "http":
        missing = [k for k in ("endpoint", "model", "credential_env") if k not in settings]
        if missing:
            raise ProviderConfigError(f"http provider settings missing: {', '.join(missing)}")
        return HttpProvider(
            endpoint=settings["endpoint"],
            model=settings["model"],
            credential_env=settings["credential_env"],
            chat=bool(settings.get("chat", False)),
            max_attempts=int(settings.get("max_attempts", 5)),
            permits=int(settings.get("permits", 4)),
            timeout=float(settings.get("timeout", 60.0)),
        )
    if kind == "replay":
        if "script" not in settings:
            raise ProviderConfigError("replay provider settings missing: script")
        return ReplayProvider.from_file(settings["script"])
    raise ProviderConfigError(f"unknown provider kind {kind!r}")
