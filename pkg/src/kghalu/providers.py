"""Pluggable external-model access: chat, embeddings, entailment.

All real network traffic goes through one widely adopted HTTP convention
(a ``messages`` array for chat, an ``input`` list for embeddings); the
entailment scorer speaks the sidecar's own two-field contract. Every provider
can be wrapped with a content-addressed file cache, a bounded in-flight
limiter, and a JSONL transcript. Scripted implementations replay fixed
completions for offline runs and tests.

Secrets never enter cache keys, transcripts, or error messages.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import mimetypes
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol, Sequence

import httpx

from .errors import (
    AuthError,
    InvariantError,
    ProviderRefusal,
    RateLimitedError,
    TransportError,
)

logger = logging.getLogger(__name__)

# Model ids used by default for the chat-based pipeline stages.
DEFAULT_EXTRACTOR_MODEL = "gpt-4-1106-preview"
DEFAULT_JUDGE_MODEL = "gpt-4-1106-preview"
DEFAULT_QUESTION_GEN_MODEL = "gpt-4-vision-preview"


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    image_ref: str  # local path or URL; treated as an opaque attachment


Part = TextPart | ImagePart


@dataclass(frozen=True)
class ChatMessage:
    role: str
    parts: tuple[Part, ...]

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise InvariantError(f"unknown message role {self.role!r}")
        object.__setattr__(self, "parts", tuple(self.parts))


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[ChatMessage, ...]
    generation_params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "messages", tuple(self.messages))
        if not any(m.role == "user" for m in self.messages):
            raise InvariantError("a chat request needs at least one user message")

    def text_content(self) -> str:
        return "\n".join(
            p.text for m in self.messages for p in m.parts if isinstance(p, TextPart)
        )

    def image_refs(self) -> tuple[str, ...]:
        return tuple(
            p.image_ref for m in self.messages for p in m.parts if isinstance(p, ImagePart)
        )


def user_text_request(
    model_id: str, text: str, generation_params: Mapping[str, Any] | None = None
) -> ChatRequest:
    return ChatRequest(
        model_id=model_id,
        messages=(ChatMessage("user", (TextPart(text),)),),
        generation_params=dict(generation_params or {}),
    )


@dataclass(frozen=True)
class EmbeddingResponse:
    vectors: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        vectors = tuple(tuple(float(x) for x in v) for v in self.vectors)
        object.__setattr__(self, "vectors", vectors)
        if not vectors:
            raise InvariantError("an embedding response carries at least one vector")
        dims = {len(v) for v in vectors}
        if len(dims) != 1 or 0 in dims:
            raise InvariantError(f"embedding vectors must share one positive dimension, got {sorted(dims)}")

    @property
    def dim(self) -> int:
        return len(self.vectors[0])


def canonical_request_payload(req: ChatRequest) -> dict:
    """Order-stable dict form of a request; map keys sorted so semantically
    identical requests share one cache key."""
    return {
        "model": req.model_id,
        "messages": [
            {
                "role": m.role,
                "parts": [
                    {"text": p.text} if isinstance(p, TextPart) else {"image_ref": p.image_ref}
                    for p in m.parts
                ],
            }
            for m in req.messages
        ],
        "generation_params": {k: req.generation_params[k] for k in sorted(req.generation_params)},
    }


def _digest(payload: Any) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def chat_request_key(provider_kind: str, req: ChatRequest, cache_salt: str = "") -> str:
    return _digest(
        {"kind": provider_kind, "salt": cache_salt, "request": canonical_request_payload(req)}
    )


def embedding_key(provider_kind: str, model_id: str, text: str) -> str:
    return _digest({"kind": provider_kind, "model": model_id, "text": text})


def entailment_key(provider_kind: str, model_id: str, premise: str, hypothesis: str) -> str:
    return _digest(
        {"kind": provider_kind, "model": model_id, "premise": premise, "hypothesis": hypothesis}
    )


class ResponseCache:
    """Directory of digest-named JSON files; eviction is manual.

    Concurrent misses on one key may each call upstream; the last write wins.
    A content mismatch on overwrite is flagged, since providers are assumed
    deterministic under fixed generation parameters.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> str | None:
        path = self._path(key)
        if not path.exists():
            return None
        entry = json.loads(path.read_text(encoding="utf-8"))
        return entry["value"]

    def put(self, key: str, value: str) -> None:
        path = self._path(key)
        with self._lock:
            if path.exists():
                previous = json.loads(path.read_text(encoding="utf-8"))["value"]
                if previous != value:
                    logger.warning(
                        "cache key %s rewritten with different content; provider nondeterminism?",
                        key[:12],
                    )
            entry = {"key": key, "value": value, "created_at": time.time()}
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(entry, ensure_ascii=False), encoding="utf-8")
            tmp.replace(path)


class Transcript:
    """Append-only JSONL log of provider traffic. Records carry request
    digests and response text only, never credentials or headers."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def record(self, event: Mapping[str, Any]) -> None:
        line = json.dumps(event, sort_keys=True, ensure_ascii=False)
        with self._lock:
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")


class ChatProvider(Protocol):
    kind: str

    def complete(self, req: ChatRequest, *, cache_salt: str = "") -> str: ...


class EmbeddingProvider(Protocol):
    def embed(self, texts: Sequence[str]) -> EmbeddingResponse: ...


class EntailmentProvider(Protocol):
    def entail(self, premise: str, hypothesis: str) -> float: ...


def _require_api_key(env_var: str) -> str:
    value = os.environ.get(env_var, "").strip()
    if not value:
        raise AuthError(f"missing credentials: set the {env_var} environment variable")
    return value


def resolve_base_url(explicit: str | None, env_var: str, default: str) -> str:
    """Explicit configuration wins, then the per-kind env var, then the default."""
    return explicit or os.environ.get(env_var, "").strip() or default


def _image_part_payload(ref: str) -> dict:
    path = Path(ref)
    if path.is_file():
        mime = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        encoded = base64.b64encode(path.read_bytes()).decode("ascii")
        url = f"data:{mime};base64,{encoded}"
    else:
        url = ref
    return {"type": "image_url", "image_url": {"url": url}}


class OpenAICompatChatProvider:
    """Chat completions over the common ``/chat/completions`` convention."""

    kind = "openai-chat"

    def __init__(
        self,
        base_url: str | None = None,
        api_key_env: str = "KGHALU_CHAT_API_KEY",
        timeout: float = 120.0,
        max_retries: int = 4,
        backoff_base: float = 0.5,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = resolve_base_url(
            base_url, "KGHALU_CHAT_BASE_URL", "https://api.openai.com/v1"
        ).rstrip("/")
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def complete(self, req: ChatRequest, *, cache_salt: str = "") -> str:
        digest = chat_request_key(self.kind, req, cache_salt)
        api_key = _require_api_key(self.api_key_env)
        body: dict[str, Any] = {
            "model": req.model_id,
            "messages": [
                {
                    "role": m.role,
                    "content": [
                        {"type": "text", "text": p.text}
                        if isinstance(p, TextPart)
                        else _image_part_payload(p.image_ref)
                        for p in m.parts
                    ],
                }
                for m in req.messages
            ],
        }
        body.update(req.generation_params)
        headers = {"Authorization": f"Bearer {api_key}"}
        url = f"{self.base_url}/chat/completions"
        attempt = 0
        while True:
            try:
                response = self._client.post(url, json=body, headers=headers)
            except httpx.HTTPError as exc:
                raise TransportError(f"chat request failed: {exc}", digest) from exc
            if response.status_code == 429:
                if attempt >= self.max_retries:
                    raise RateLimitedError(
                        f"rate limited after {attempt} retries", digest
                    )
                time.sleep(self.backoff_base * (2**attempt))
                attempt += 1
                continue
            if response.status_code in (401, 403):
                raise AuthError(
                    f"provider rejected credentials from {self.api_key_env} "
                    f"(HTTP {response.status_code})",
                    digest,
                )
            if 400 <= response.status_code < 500:
                raise ProviderRefusal(response.text, digest)
            if response.status_code >= 500:
                raise TransportError(
                    f"provider error HTTP {response.status_code}: {response.text[:200]}",
                    digest,
                )
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise TransportError(f"malformed completion body: {exc}", digest) from exc


class OpenAICompatEmbeddingProvider:
    """Embeddings over the common ``/embeddings`` convention."""

    kind = "openai-embed"

    def __init__(
        self,
        base_url: str | None = None,
        model_id: str = "text-embedding-3-small",
        api_key_env: str = "KGHALU_EMBED_API_KEY",
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = resolve_base_url(
            base_url, "KGHALU_EMBED_BASE_URL", "https://api.openai.com/v1"
        ).rstrip("/")
        self.model_id = model_id
        self.api_key_env = api_key_env
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def embed(self, texts: Sequence[str]) -> EmbeddingResponse:
        if not texts:
            raise ValueError("embed requires a non-empty list of texts")
        digest = _digest({"kind": self.kind, "model": self.model_id, "texts": list(texts)})
        api_key = _require_api_key(self.api_key_env)
        try:
            response = self._client.post(
                f"{self.base_url}/embeddings",
                json={"model": self.model_id, "input": list(texts)},
                headers={"Authorization": f"Bearer {api_key}"},
            )
        except httpx.HTTPError as exc:
            raise TransportError(f"embedding request failed: {exc}", digest) from exc
        if response.status_code != 200:
            raise TransportError(
                f"embedding provider HTTP {response.status_code}: {response.text[:200]}", digest
            )
        rows = sorted(response.json()["data"], key=lambda item: item["index"])
        return EmbeddingResponse(tuple(tuple(row["embedding"]) for row in rows))


class SidecarEmbeddingProvider:
    """Client for the companion sidecar's ``POST /embed`` endpoint."""

    kind = "sidecar-embed"

    def __init__(
        self,
        base_url: str | None = None,
        model_id: str = "all-mpnet-base-v2",
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = resolve_base_url(
            base_url, "KGHALU_SIDECAR_BASE_URL", "http://127.0.0.1:8600"
        ).rstrip("/")
        self.model_id = model_id
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def embed(self, texts: Sequence[str]) -> EmbeddingResponse:
        if not texts:
            raise ValueError("embed requires a non-empty list of texts")
        digest = _digest({"kind": self.kind, "texts": list(texts)})
        try:
            response = self._client.post(f"{self.base_url}/embed", json={"texts": list(texts)})
        except httpx.HTTPError as exc:
            raise TransportError(f"sidecar embed failed: {exc}", digest) from exc
        if response.status_code != 200:
            raise TransportError(
                f"sidecar embed HTTP {response.status_code}: {response.text[:200]}", digest
            )
        return EmbeddingResponse(tuple(tuple(v) for v in response.json()["vectors"]))


class SidecarEntailmentProvider:
    """Client for the companion sidecar's ``POST /nli`` endpoint."""

    kind = "sidecar-nli"

    def __init__(
        self,
        base_url: str | None = None,
        model_id: str = "cross-encoder/nli-deberta-v3-base",
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = resolve_base_url(
            base_url, "KGHALU_SIDECAR_BASE_URL", "http://127.0.0.1:8600"
        ).rstrip("/")
        self.model_id = model_id
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def entail(self, premise: str, hypothesis: str) -> float:
        if not premise or not hypothesis:
            raise ValueError("entail requires non-empty premise and hypothesis")
        digest = _digest({"kind": self.kind, "premise": premise, "hypothesis": hypothesis})
        try:
            response = self._client.post(
                f"{self.base_url}/nli", json={"premise": premise, "hypothesis": hypothesis}
            )
        except httpx.HTTPError as exc:
            raise TransportError(f"sidecar nli failed: {exc}", digest) from exc
        if response.status_code != 200:
            raise TransportError(
                f"sidecar nli HTTP {response.status_code}: {response.text[:200]}", digest
            )
        return float(response.json()["entailment"])


# ---------------------------------------------------------------------------
# Scripted implementations for offline runs and tests.
# ---------------------------------------------------------------------------

_KG_ECHO_MARKER = "### Input:\n"
_KG_ECHO_TAIL = "\n\n### KG:"


def _kg_echo_completion(prompt: str) -> str:
    # Echo back the final substituted input block, which scripted runs fill
    # with ready-made triplet lines.
    start = prompt.rfind(_KG_ECHO_MARKER)
    if start < 0:
        return "<Done>"
    body = prompt[start + len(_KG_ECHO_MARKER):]
    if body.endswith(_KG_ECHO_TAIL):
        body = body[: -len(_KG_ECHO_TAIL)]
    return body + "\n<Done>"


class ScriptedChatProvider:
    """Deterministic chat provider driven by substring rules.

    Rules are ``(contains, completion)`` pairs matched in order against the
    request's text content; ``kg_echo`` replays the last substituted input
    block, which lets fixtures carry their own extraction output. All requests
    are recorded for audits (call counts, image attachments, concurrency).
    """

    kind = "scripted-chat"

    def __init__(
        self,
        rules: Iterable[tuple[str, str]] = (),
        default: str | None = None,
        kg_echo: bool = False,
        delay: float = 0.0,
    ):
        self.rules = tuple(rules)
        self.default = default
        self.kg_echo = kg_echo
        self.delay = delay
        self.requests: list[ChatRequest] = []
        self.call_count = 0
        self.max_in_flight = 0
        self._in_flight = 0
        self._lock = threading.Lock()

    @classmethod
    def from_playbook(cls, playbook: Mapping[str, Any]) -> "ScriptedChatProvider":
        return cls(
            rules=tuple((r["contains"], r["completion"]) for r in playbook.get("rules", ())),
            default=playbook.get("default"),
            kg_echo=bool(playbook.get("kg_echo", False)),
        )

    def complete(self, req: ChatRequest, *, cache_salt: str = "") -> str:
        with self._lock:
            self.requests.append(req)
            self.call_count += 1
            self._in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self._in_flight)
        try:
            if self.delay:
                time.sleep(self.delay)
            text = req.text_content()
            for contains, completion in self.rules:
                if contains in text:
                    return completion
            if self.kg_echo:
                return _kg_echo_completion(text)
            if self.default is not None:
                return self.default
            raise ProviderRefusal(
                "scripted provider has no rule for this request",
                chat_request_key(self.kind, req, cache_salt),
            )
        finally:
            with self._lock:
                self._in_flight -= 1


def _hashed_vector(text: str, dim: int) -> tuple[float, ...]:
    seed = hashlib.sha256(text.encode("utf-8")).digest()
    raw = []
    counter = 0
    while len(raw) < dim:
        block = hashlib.sha256(seed + counter.to_bytes(2, "big")).digest()
        raw.extend(b / 255.0 for b in block)
        counter += 1
    return tuple(raw[:dim])


class ScriptedEmbeddingProvider:
    """Embedding provider backed by an explicit text-to-vector table.

    Unknown texts fall back to a deterministic hashed vector so pipelines
    never crash on unanticipated inputs.
    """

    kind = "scripted-embed"

    def __init__(self, table: Mapping[str, Sequence[float]] | None = None, default_dim: int = 8):
        self.table = {k: tuple(float(x) for x in v) for k, v in (table or {}).items()}
        self.default_dim = default_dim
        self.call_count = 0

    @classmethod
    def from_playbook(cls, playbook: Mapping[str, Any]) -> "ScriptedEmbeddingProvider":
        return cls(playbook.get("table", {}), int(playbook.get("default_dim", 8)))

    def embed(self, texts: Sequence[str]) -> EmbeddingResponse:
        if not texts:
            raise ValueError("embed requires a non-empty list of texts")
        self.call_count += 1
        dim = len(next(iter(self.table.values()))) if self.table else self.default_dim
        return EmbeddingResponse(
            tuple(self.table.get(t, _hashed_vector(t, dim)) for t in texts)
        )


class ScriptedEntailmentProvider:
    """Entailment provider with exact (premise, hypothesis) or hypothesis-only lookup."""

    kind = "scripted-nli"

    def __init__(
        self,
        pairs: Mapping[tuple[str, str], float] | None = None,
        by_hypothesis: Mapping[str, float] | None = None,
        default: float = 0.0,
        failures: int = 0,
    ):
        self.pairs = dict(pairs or {})
        self.by_hypothesis = dict(by_hypothesis or {})
        self.default = float(default)
        self.failures_remaining = failures
        self.call_count = 0

    @classmethod
    def from_playbook(cls, playbook: Mapping[str, Any]) -> "ScriptedEntailmentProvider":
        pairs = {(p, h): float(s) for p, h, s in playbook.get("pairs", ())}
        return cls(pairs, playbook.get("by_hypothesis", {}), float(playbook.get("default", 0.0)))

    def entail(self, premise: str, hypothesis: str) -> float:
        if not premise or not hypothesis:
            raise ValueError("entail requires non-empty premise and hypothesis")
        self.call_count += 1
        if self.failures_remaining > 0:
            self.failures_remaining -= 1
            raise TransportError("scripted entailment failure")
        if (premise, hypothesis) in self.pairs:
            return self.pairs[(premise, hypothesis)]
        return self.by_hypothesis.get(hypothesis, self.default)


# ---------------------------------------------------------------------------
# Wrappers: caching, bounded concurrency, transcripts.
# ---------------------------------------------------------------------------


class CachingChatProvider:
    def __init__(self, inner: ChatProvider, cache: ResponseCache, transcript: Transcript | None = None):
        self.inner = inner
        self.cache = cache
        self.transcript = transcript
        self.kind = inner.kind

    def complete(self, req: ChatRequest, *, cache_salt: str = "") -> str:
        key = chat_request_key(self.inner.kind, req, cache_salt)
        cached = self.cache.get(key)
        if cached is None:
            value = self.inner.complete(req, cache_salt=cache_salt)
            self.cache.put(key, value)
        else:
            value = cached
        if self.transcript is not None:
            self.transcript.record(
                {
                    "event": "chat",
                    "provider": self.inner.kind,
                    "model": req.model_id,
                    "request_digest": key,
                    "cached": cached is not None,
                    "response": value,
                }
            )
        return value


class CachingEmbeddingProvider:
    """Caches one vector per individual text."""

    def __init__(
        self,
        inner: EmbeddingProvider,
        cache: ResponseCache,
        model_id: str = "",
        transcript: Transcript | None = None,
    ):
        self.inner = inner
        self.cache = cache
        self.model_id = model_id or getattr(inner, "model_id", "")
        self.kind = getattr(inner, "kind", "embed")
        self.transcript = transcript

    def embed(self, texts: Sequence[str]) -> EmbeddingResponse:
        if not texts:
            raise ValueError("embed requires a non-empty list of texts")
        keys = [embedding_key(self.kind, self.model_id, t) for t in texts]
        found: dict[int, tuple[float, ...]] = {}
        missing: list[int] = []
        for i, key in enumerate(keys):
            hit = self.cache.get(key)
            if hit is None:
                missing.append(i)
            else:
                found[i] = tuple(json.loads(hit))
        if missing:
            fresh = self.inner.embed([texts[i] for i in missing])
            for slot, vector in zip(missing, fresh.vectors):
                found[slot] = vector
                self.cache.put(keys[slot], json.dumps(list(vector)))
        response = EmbeddingResponse(tuple(found[i] for i in range(len(texts))))
        if self.transcript is not None:
            self.transcript.record(
                {
                    "event": "embed",
                    "provider": self.kind,
                    "model": self.model_id,
                    "text_digests": keys,
                    "cached": len(texts) - len(missing),
                    "dim": response.dim,
                }
            )
        return response


class CachingEntailmentProvider:
    def __init__(
        self,
        inner: EntailmentProvider,
        cache: ResponseCache,
        model_id: str = "",
        transcript: Transcript | None = None,
    ):
        self.inner = inner
        self.cache = cache
        self.model_id = model_id or getattr(inner, "model_id", "")
        self.kind = getattr(inner, "kind", "nli")
        self.transcript = transcript

    def entail(self, premise: str, hypothesis: str) -> float:
        key = entailment_key(self.kind, self.model_id, premise, hypothesis)
        hit = self.cache.get(key)
        if hit is not None:
            score = float(hit)
        else:
            score = self.inner.entail(premise, hypothesis)
            self.cache.put(key, repr(score))
        if self.transcript is not None:
            self.transcript.record(
                {
                    "event": "entail",
                    "provider": self.kind,
                    "model": self.model_id,
                    "request_digest": key,
                    "cached": hit is not None,
                    "score": score,
                }
            )
        return score


class ConcurrencyLimitedChatProvider:
    """Bounds in-flight completions with a shared semaphore."""

    def __init__(self, inner: ChatProvider, limit: int):
        if limit < 1:
            raise ValueError("concurrency limit must be >= 1")
        self.inner = inner
        self.kind = inner.kind
        self._semaphore = threading.BoundedSemaphore(limit)

    def complete(self, req: ChatRequest, *, cache_salt: str = "") -> str:
        with self._semaphore:
            return self.inner.complete(req, cache_salt=cache_salt)
