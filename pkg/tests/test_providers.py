import json
from concurrent.futures import ThreadPoolExecutor

import pytest

from kghalu.errors import AuthError, ProviderRefusal, RateLimitedError, TransportError
from kghalu.providers import (
    CachingChatProvider,
    CachingEmbeddingProvider,
    CachingEntailmentProvider,
    ChatMessage,
    ChatRequest,
    ConcurrencyLimitedChatProvider,
    EmbeddingResponse,
    ImagePart,
    OpenAICompatChatProvider,
    ResponseCache,
    ScriptedChatProvider,
    ScriptedEmbeddingProvider,
    ScriptedEntailmentProvider,
    TextPart,
    Transcript,
    chat_request_key,
    user_text_request,
)


def request(text="hello", **params):
    return user_text_request("test-model", text, params)


class TestRequestCanonicalization:
    def test_key_independent_of_param_order(self):
        a = ChatRequest(
            "m", (ChatMessage("user", (TextPart("x"),)),), {"temperature": 0, "maxTokens": 5}
        )
        b = ChatRequest(
            "m", (ChatMessage("user", (TextPart("x"),)),), {"maxTokens": 5, "temperature": 0}
        )
        assert chat_request_key("k", a) == chat_request_key("k", b)

    def test_temperature_changes_key(self):
        assert chat_request_key("k", request(temperature=0.0)) != chat_request_key(
            "k", request(temperature=1.0)
        )

    def test_salt_changes_key(self):
        assert chat_request_key("k", request()) != chat_request_key("k", request(), "retry-1")

    def test_user_message_required(self):
        with pytest.raises(Exception):
            ChatRequest("m", (ChatMessage("system", (TextPart("x"),)),))


class TestEmbeddingResponse:
    def test_dimensions_must_agree(self):
        with pytest.raises(Exception):
            EmbeddingResponse(((1.0, 2.0), (1.0,)))

    def test_dim(self):
        assert EmbeddingResponse(((1.0, 2.0),)).dim == 2


class TestScriptedChat:
    def test_rules_in_order(self):
        provider = ScriptedChatProvider(rules=(("alpha", "first"), ("a", "second")))
        assert provider.complete(request("alpha beta")) == "first"
        assert provider.complete(request("gamma a")) == "second"

    def test_default_and_refusal(self):
        assert ScriptedChatProvider(default="d").complete(request("zzz")) == "d"
        with pytest.raises(ProviderRefusal):
            ScriptedChatProvider().complete(request("zzz"))

    def test_kg_echo_returns_input_block(self):
        from kghalu.extraction import build_extraction_prompt

        provider = ScriptedChatProvider(kg_echo=True)
        completion = provider.complete(
            request(build_extraction_prompt('("a", "b", "c")'))
        )
        assert completion == '("a", "b", "c")\n<Done>'

    def test_records_requests(self):
        provider = ScriptedChatProvider(default="d")
        provider.complete(request("one"))
        provider.complete(request("two"))
        assert provider.call_count == 2
        assert provider.requests[1].text_content() == "two"


class TestCache:
    def test_chat_cache_hit_skips_upstream(self, tmp_path):
        inner = ScriptedChatProvider(default="cached answer")
        provider = CachingChatProvider(inner, ResponseCache(tmp_path))
        first = provider.complete(request())
        second = provider.complete(request())
        assert first == second == "cached answer"
        assert inner.call_count == 1

    def test_different_params_miss(self, tmp_path):
        inner = ScriptedChatProvider(default="x")
        provider = CachingChatProvider(inner, ResponseCache(tmp_path))
        provider.complete(request(temperature=0.0))
        provider.complete(request(temperature=0.7))
        assert inner.call_count == 2

    def test_embedding_cached_per_text(self, tmp_path):
        inner = ScriptedEmbeddingProvider({"a": (1.0, 0.0), "b": (0.0, 1.0)})
        provider = CachingEmbeddingProvider(inner, ResponseCache(tmp_path), model_id="m")
        provider.embed(["a"])
        out = provider.embed(["a", "b"])
        assert out.vectors == ((1.0, 0.0), (0.0, 1.0))
        # second call only needed to embed "b"
        assert inner.call_count == 2

    def test_entailment_cached(self, tmp_path):
        inner = ScriptedEntailmentProvider(by_hypothesis={"h": 0.75})
        provider = CachingEntailmentProvider(inner, ResponseCache(tmp_path), model_id="m")
        assert provider.entail("p", "h") == 0.75
        assert provider.entail("p", "h") == 0.75
        assert inner.call_count == 1

    def test_transcript_records_digest_and_cached_flag(self, tmp_path):
        transcript = Transcript(tmp_path / "t.jsonl")
        inner = ScriptedChatProvider(default="x")
        provider = CachingChatProvider(inner, ResponseCache(tmp_path / "cache"), transcript)
        provider.complete(request())
        provider.complete(request())
        rows = [
            json.loads(line)
            for line in (tmp_path / "t.jsonl").read_text().splitlines()
        ]
        assert [r["cached"] for r in rows] == [False, True]
        assert rows[0]["request_digest"] == rows[1]["request_digest"]


class TestConcurrencyLimit:
    def test_in_flight_never_exceeds_limit(self):
        inner = ScriptedChatProvider(default="x", delay=0.01)
        provider = ConcurrencyLimitedChatProvider(inner, limit=3)
        with ThreadPoolExecutor(max_workers=16) as pool:
            list(pool.map(lambda _: provider.complete(request()), range(48)))
        assert inner.call_count == 48
        assert inner.max_in_flight <= 3


class TestScriptedEntailmentFailures:
    def test_configured_failures_then_success(self):
        provider = ScriptedEntailmentProvider(by_hypothesis={"h": 0.9}, failures=2)
        with pytest.raises(TransportError):
            provider.entail("p", "h")
        with pytest.raises(TransportError):
            provider.entail("p", "h")
        assert provider.entail("p", "h") == 0.9

    def test_empty_arguments_rejected(self):
        with pytest.raises(ValueError):
            ScriptedEntailmentProvider().entail("p", "")
        with pytest.raises(ValueError):
            ScriptedEmbeddingProvider().embed([])


class _Responder:
    """Minimal httpx mock transport for the OpenAI-compatible client."""

    def __init__(self, statuses, body=None):
        self.statuses = list(statuses)
        self.body = body or {"choices": [{"message": {"content": "ok"}}]}
        self.calls = 0

    def __call__(self, request):
        import httpx

        self.calls += 1
        status = self.statuses.pop(0) if self.statuses else 200
        if status == 200:
            return httpx.Response(200, json=self.body)
        return httpx.Response(status, text="nope")


class TestOpenAICompatChat:
    def test_missing_credentials_names_env_var(self, monkeypatch):
        import httpx

        monkeypatch.delenv("KGHALU_CHAT_API_KEY", raising=False)
        provider = OpenAICompatChatProvider(
            "http://example.invalid/v1",
            transport=httpx.MockTransport(_Responder([200])),
        )
        with pytest.raises(AuthError) as info:
            provider.complete(request())
        assert "KGHALU_CHAT_API_KEY" in str(info.value)

    def test_rate_limit_retries_then_succeeds(self, monkeypatch):
        import httpx

        monkeypatch.setenv("KGHALU_CHAT_API_KEY", "k")
        responder = _Responder([429, 429, 200])
        provider = OpenAICompatChatProvider(
            "http://example.invalid/v1",
            transport=httpx.MockTransport(responder),
            backoff_base=0.0,
        )
        assert provider.complete(request()) == "ok"
        assert responder.calls == 3

    def test_rate_limit_budget_exhausted(self, monkeypatch):
        import httpx

        monkeypatch.setenv("KGHALU_CHAT_API_KEY", "k")
        provider = OpenAICompatChatProvider(
            "http://example.invalid/v1",
            transport=httpx.MockTransport(_Responder([429] * 10)),
            max_retries=2,
            backoff_base=0.0,
        )
        with pytest.raises(RateLimitedError):
            provider.complete(request())

    def test_refusal_surfaced_verbatim(self, monkeypatch):
        import httpx

        monkeypatch.setenv("KGHALU_CHAT_API_KEY", "k")
        provider = OpenAICompatChatProvider(
            "http://example.invalid/v1",
            transport=httpx.MockTransport(_Responder([422])),
        )
        with pytest.raises(ProviderRefusal) as info:
            provider.complete(request())
        assert "nope" in str(info.value)

    def test_image_parts_become_data_uris(self, monkeypatch, tmp_path):
        import httpx

        monkeypatch.setenv("KGHALU_CHAT_API_KEY", "k")
        image = tmp_path / "img.png"
        image.write_bytes(b"\x89PNG tiny")
        captured = {}

        def handler(req):
            captured["body"] = json.loads(req.content)
            return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

        provider = OpenAICompatChatProvider(
            "http://example.invalid/v1", transport=httpx.MockTransport(handler)
        )
        req = ChatRequest(
            "m", (ChatMessage("user", (TextPart("what is this?"), ImagePart(str(image)))),)
        )
        provider.complete(req)
        parts = captured["body"]["messages"][0]["content"]
        assert parts[0] == {"type": "text", "text": "what is this?"}
        assert parts[1]["image_url"]["url"].startswith("data:image/png;base64,")
