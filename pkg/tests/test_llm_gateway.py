import hashlib
import json
import random
import threading

import httpx
import pytest

from orderpipe.llm_gateway import (
    BadRequest,
    ChatMessage,
    CompletionRequest,
    CompletionResponse,
    FinishReason,
    HttpBackend,
    LLMSettings,
    RateLimited,
    RecordingBackend,
    ReplayBackend,
    ReplayMiss,
    RetryPolicy,
    Role,
    ScriptedBackend,
    TransportError,
    complete,
    complete_with_retry,
    map_bounded,
)


def req(text="hello", model="m", temperature=0.0):
    return CompletionRequest(model, (ChatMessage(Role.SYSTEM, "sys"), ChatMessage(Role.USER, text)), temperature)


def no_sleep(_):
    pass


def test_request_invariants():
    with pytest.raises(ValueError):
        CompletionRequest("m", ())
    with pytest.raises(ValueError):
        CompletionRequest("m", (ChatMessage(Role.USER, "a"), ChatMessage(Role.SYSTEM, "b")))
    with pytest.raises(ValueError):
        ChatMessage(Role.USER, "")
    with pytest.raises(ValueError):
        CompletionRequest("m", (ChatMessage(Role.USER, "a"),), temperature=-1)
    ChatMessage(Role.ASSISTANT, "")


def test_canonical_hash_is_fixed():
    expected = b'{"messages":[{"content":"sys","role":"system"},{"content":"hello","role":"user"}],"model":"m","temperature":0.0}'
    r = req()
    assert r.canonical_bytes() == expected
    assert r.fixture_key() == hashlib.sha256(expected).hexdigest()[:16]
    # max_tokens and seed do not change the key; model and temperature do
    assert CompletionRequest("m", r.messages, 0.0, max_tokens=5, seed=3).fixture_key() == r.fixture_key()
    assert req(model="m2").fixture_key() != r.fixture_key()
    assert req(temperature=0.5).fixture_key() != r.fixture_key()
    assert req(text="héllo").canonical_bytes().decode("utf-8").count("é") == 1


def test_scripted_passthrough():
    b = ScriptedBackend(["[]"])
    assert complete(b, req()).text == "[]"
    with pytest.raises(BadRequest):
        complete(b, req())


def test_retry_transport_then_success():
    b = ScriptedBackend([TransportError("down"), TransportError("down"), "ok"])
    resp = complete_with_retry(b, req(), RetryPolicy(max_attempts=3), sleep=no_sleep)
    assert resp.text == "ok" and resp.attempts == 3 and b.calls == 3


def test_retry_fatal_is_immediate():
    b = ScriptedBackend([BadRequest("400"), "ok"])
    with pytest.raises(BadRequest) as exc:
        complete_with_retry(b, req(), RetryPolicy(max_attempts=3), sleep=no_sleep)
    assert exc.value.attempts == 1 and b.calls == 1


def test_retry_exhaustion():
    b = ScriptedBackend([RateLimited("429")] * 5)
    sleeps = []
    with pytest.raises(RateLimited) as exc:
        complete_with_retry(b, req(), RetryPolicy(max_attempts=3, base_backoff=1.0), sleep=sleeps.append,
                            rng=random.Random(0))
    assert exc.value.attempts == 3 and b.calls == 3
    assert len(sleeps) == 2
    assert 0.5 <= sleeps[0] <= 1.0 and 1.0 <= sleeps[1] <= 2.0


def test_retry_policy_validation():
    with pytest.raises(ValueError):
        RetryPolicy(max_attempts=0)


def test_record_then_replay(tmp_path):
    inner = ScriptedBackend(["first", "second"])
    rec = RecordingBackend(inner, tmp_path)
    assert complete(rec, req("a")).text == "first"
    assert complete(rec, req("b")).text == "second"
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == sorted([req("a").fixture_key() + ".json", req("b").fixture_key() + ".json"])
    doc = json.loads((tmp_path / files[0]).read_text())
    assert set(doc) == {"request", "response", "timestamp"}

    replay = ReplayBackend(tmp_path)
    one, two = complete(replay, req("a")), complete(replay, req("a"))
    assert one == two and one.text == "first"
    assert complete(replay, req("b")).text == "second"


def test_replay_miss(tmp_path):
    with pytest.raises(ReplayMiss) as exc:
        complete(ReplayBackend(tmp_path), req("never recorded"))
    assert req("never recorded").fixture_key() in str(exc.value)
    assert not exc.value.retryable


def openai_handler(seen):
    def handle(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        body = json.loads(request.content)
        text = body["messages"][-1]["content"]
        if text == "boom":
            return httpx.Response(503, text="unavailable")
        if text == "slow down":
            return httpx.Response(429, text="rate limited")
        if text == "bad":
            return httpx.Response(400, text="bad request")
        if text == "garbage":
            return httpx.Response(200, text="not json")
        return httpx.Response(200, json={
            "choices": [{"message": {"role": "assistant", "content": text.upper()}, "finish_reason": "length"}],
            "usage": {"prompt_tokens": 7, "completion_tokens": 2},
        })
    return handle


def test_http_backend_wire_format(monkeypatch):
    monkeypatch.setenv("ORDERPIPE_API_KEY", "sekrit")
    seen = []
    b = HttpBackend("http://llm.test/v1/", transport=httpx.MockTransport(openai_handler(seen)))
    resp = b.complete(CompletionRequest("medgemma", (ChatMessage(Role.USER, "hi"),), 0.0, 64))
    assert resp.text == "HI" and resp.finish_reason is FinishReason.LENGTH
    assert resp.token_usage == {"prompt": 7, "completion": 2}
    r = seen[0]
    assert r.method == "POST" and str(r.url) == "http://llm.test/v1/chat/completions"
    assert r.headers["authorization"] == "Bearer sekrit"
    assert json.loads(r.content) == {"model": "medgemma", "messages": [{"role": "user", "content": "hi"}],
                                     "temperature": 0.0, "max_tokens": 64}


@pytest.mark.parametrize("text,error", [
    ("boom", TransportError), ("slow down", RateLimited), ("bad", BadRequest), ("garbage", TransportError),
])
def test_http_backend_errors(text, error):
    b = HttpBackend("http://llm.test/v1", api_key="", transport=httpx.MockTransport(openai_handler([])))
    with pytest.raises(error):
        b.complete(req(text))


def test_http_unreachable():
    b = HttpBackend("http://127.0.0.1:9", api_key="", timeout=2)
    with pytest.raises(TransportError):
        complete_with_retry(b, req(), RetryPolicy(max_attempts=2, base_backoff=0), sleep=no_sleep)


def test_map_bounded_preserves_order_and_bound():
    active, peak = 0, 0
    lock = threading.Lock()

    def work(x):
        nonlocal active, peak
        with lock:
            active += 1
            peak = max(peak, active)
        threading.Event().wait(0.01)
        with lock:
            active -= 1
        return x * x

    assert map_bounded(work, list(range(20)), concurrency=3) == [x * x for x in range(20)]
    assert peak <= 3
    with pytest.raises(ValueError):
        map_bounded(work, [1], concurrency=0)


def test_settings_build_request():
    s = LLMSettings(model="x", temperature=0.2, max_tokens=10, seed=1)
    r = s.request([ChatMessage(Role.USER, "u")])
    assert (r.model, r.temperature, r.max_tokens, r.seed) == ("x", 0.2, 10, 1)


def test_response_roundtrip():
    r = CompletionResponse("t", FinishReason.OTHER, 0.5, {"prompt": 1, "completion": 2})
    assert CompletionResponse.from_dict(r.to_dict()) == r
