"""Chat-completion access: HTTP, scripted and replay backends, retry, fixture recording."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence, TypeVar

import httpx

log = logging.getLogger(__name__)

API_KEY_ENV = "ORDERPIPE_API_KEY"


class Role(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


class FinishReason(str, Enum):
    STOP = "stop"
    LENGTH = "length"
    OTHER = "other"


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        if self.role in (Role.SYSTEM, Role.USER) and not self.content:
            raise ValueError(f"{self.role.value} message must have content")


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.0
    max_tokens: int = 2048
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValueError("request needs at least one message")
        if any(m.role is Role.SYSTEM for m in self.messages[1:]):
            raise ValueError("a system message may only appear first")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    def canonical_bytes(self) -> bytes:
        """Serialization the fixture hash is computed over.

        Compact JSON with sorted keys, UTF-8, of ``model``, ``messages``
        (role and content) and ``temperature`` as a float. ``max_tokens`` and
        ``seed`` are deliberately left out.
        """
        doc = {
            "model": self.model,
            "messages": [{"role": m.role.value, "content": m.content} for m in self.messages],
            "temperature": float(self.temperature),
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")

    def fixture_key(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()[:16]

    def to_dict(self) -> dict:
        d = {
            "model": self.model,
            "messages": [{"role": m.role.value, "content": m.content} for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        if self.seed is not None:
            d["seed"] = self.seed
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CompletionRequest":
        return cls(
            model=d["model"],
            messages=tuple(ChatMessage(Role(m["role"]), m["content"]) for m in d["messages"]),
            temperature=d.get("temperature", 0.0),
            max_tokens=d.get("max_tokens", 2048),
            seed=d.get("seed"),
        )


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    finish_reason: FinishReason = FinishReason.STOP
    latency: float = 0.0  # seconds
    token_usage: dict[str, int] | None = None
    attempts: int = 1

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "finish_reason": self.finish_reason.value,
            "latency": self.latency,
            "token_usage": self.token_usage,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CompletionResponse":
        return cls(
            text=d["text"],
            finish_reason=FinishReason(d.get("finish_reason", "stop")),
            latency=d.get("latency", 0.0),
            token_usage=d.get("token_usage"),
        )


class GatewayError(Exception):
    retryable = False
    attempts: int = 1


class TransportError(GatewayError):
    retryable = True


class RateLimited(GatewayError):
    retryable = True


class BadRequest(GatewayError):
    pass


class ReplayMiss(GatewayError):
    def __init__(self, key: str, request: CompletionRequest):
        self.key = key
        last = request.messages[-1].content
        digest = hashlib.sha256(last.encode("utf-8")).hexdigest()[:12]
        super().__init__(
            f"no fixture for request {key} (model={request.model}, "
            f"last message sha256 {digest}, {len(last)} chars: {last[:80]!r})"
        )


class Backend(Protocol):
    def complete(self, req: CompletionRequest) -> CompletionResponse: ...


def complete(backend: Backend, req: CompletionRequest) -> CompletionResponse:
    return backend.complete(req)


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_backoff: float = 1.0  # seconds; doubles per attempt
    jitter: float = 0.5  # fraction of the delay that is randomized

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    def delay(self, attempt: int, rng: random.Random) -> float:
        base = self.base_backoff * 2 ** (attempt - 1)
        return base * (1 - self.jitter * rng.random())


def complete_with_retry(
    backend: Backend,
    req: CompletionRequest,
    policy: RetryPolicy = RetryPolicy(),
    sleep: Callable[[float], None] = time.sleep,
    rng: random.Random | None = None,
) -> CompletionResponse:
    """Call ``backend`` and retry transport failures and rate limits.

    Fatal errors propagate at once. After the last attempt the final error is
    re-raised with ``attempts`` set on it.
    """
    rng = rng or random.Random()
    for attempt in range(1, policy.max_attempts + 1):
        try:
            resp = backend.complete(req)
        except GatewayError as exc:
            exc.attempts = attempt
            if not exc.retryable or attempt == policy.max_attempts:
                raise
            wait = policy.delay(attempt, rng)
            log.warning("attempt %d/%d failed (%s); retrying in %.2fs", attempt, policy.max_attempts, exc, wait)
            sleep(wait)
            continue
        return replace(resp, attempts=attempt)
    raise AssertionError("unreachable")


class ScriptedBackend:
    """Returns canned responses in order. An exception instance in the script is raised instead."""

    def __init__(self, script: Iterable[str | Exception | CompletionResponse]):
        self._script = list(script)
        self._pos = 0
        self._lock = threading.Lock()
        self.requests: list[CompletionRequest] = []

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        with self._lock:
            self.requests.append(req)
            if self._pos >= len(self._script):
                raise BadRequest(f"scripted backend exhausted after {self._pos} responses")
            item = self._script[self._pos]
            self._pos += 1
        if isinstance(item, Exception):
            raise item
        if isinstance(item, CompletionResponse):
            return item
        return CompletionResponse(text=item)

    @property
    def calls(self) -> int:
        return len(self.requests)


class FixtureStore:
    """One JSON file per request, named by the request's fixture key."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path_for(self, req: CompletionRequest) -> Path:
        return self.root / f"{req.fixture_key()}.json"

    def load(self, req: CompletionRequest) -> CompletionResponse | None:
        p = self.path_for(req)
        if not p.exists():
            return None
        doc = json.loads(p.read_text(encoding="utf-8"))
        return CompletionResponse.from_dict(doc["response"])

    def save(self, req: CompletionRequest, resp: CompletionResponse) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        p = self.path_for(req)
        doc = {
            "request": req.to_dict(),
            "response": resp.to_dict(),
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        tmp = p.with_suffix(f".tmp{threading.get_ident()}")
        tmp.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        tmp.replace(p)
        return p


class ReplayBackend:
    def __init__(self, root: str | Path):
        self.store = FixtureStore(root)

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        resp = self.store.load(req)
        if resp is None:
            raise ReplayMiss(req.fixture_key(), req)
        return resp


class RecordingBackend:
    """Passes requests to ``inner`` and stores every successful exchange."""

    def __init__(self, inner: Backend, root: str | Path):
        self.inner = inner
        self.store = FixtureStore(root)

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        resp = self.inner.complete(req)
        self.store.save(req, resp)
        return resp


_FINISH = {"stop": FinishReason.STOP, "length": FinishReason.LENGTH}


class HttpBackend:
    """OpenAI-compatible ``POST {base_url}/chat/completions``."""

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        timeout: float = 120.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._client = httpx.Client(headers=headers, timeout=timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        t0 = time.perf_counter()
        try:
            r = self._client.post(f"{self.base_url}/chat/completions", json=req.to_dict())
        except httpx.HTTPError as exc:
            raise TransportError(f"{type(exc).__name__}: {exc}") from exc
        latency = time.perf_counter() - t0
        if r.status_code == 429:
            raise RateLimited(f"HTTP 429: {r.text[:200]}")
        if r.status_code >= 500:
            raise TransportError(f"HTTP {r.status_code}: {r.text[:200]}")
        if r.status_code >= 400:
            raise BadRequest(f"HTTP {r.status_code}: {r.text[:200]}")
        try:
            body = r.json()
            choice = body["choices"][0]
            text = choice["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completion body: {r.text[:200]}") from exc
        usage = body.get("usage") or None
        if usage:
            usage = {"prompt": usage.get("prompt_tokens", 0), "completion": usage.get("completion_tokens", 0)}
        finish = _FINISH.get(choice.get("finish_reason"), FinishReason.OTHER)
        return CompletionResponse(text=text, finish_reason=finish, latency=latency, token_usage=usage)


T = TypeVar("T")
R = TypeVar("R")


def map_bounded(fn: Callable[[T], R], items: Sequence[T], concurrency: int = 4) -> list[R]:
    """Apply ``fn`` with at most ``concurrency`` calls in flight; results keep input order."""
    if concurrency < 1:
        raise ValueError("concurrency must be >= 1")
    if concurrency == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        return list(pool.map(fn, items))


@dataclass
class LLMSettings:
    """Decoding and retry settings shared by every call a strategy makes."""

    model: str = "medgemma-4b"
    temperature: float = 0.0
    max_tokens: int = 2048
    seed: int | None = None
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    def request(self, messages: Sequence[ChatMessage]) -> CompletionRequest:
        return CompletionRequest(self.model, tuple(messages), self.temperature, self.max_tokens, self.seed)
