import json
import re

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aopagent.backends import (
    BagOfWordsEmbedder,
    HashEmbedder,
    ReplayChatBackend,
    ScriptedChatBackend,
    SequenceChatBackend,
)
from aopagent.backends.asr import FileTranscriptProvider, parse_transcript
from aopagent.backends.base import BackendConfig, ChatMessage, ChatRequest, MediaAttachment, normalize_rows
from aopagent.backends.openai_http import ContextBudgetError, OpenAICompatibleClient
from aopagent.errors import IngestionError, PreconditionError, ProtocolError, TransportError


def client(handler, sleeps=None, **cfg):
    config = BackendConfig(base_url="http://test/v1", **cfg)
    return OpenAICompatibleClient(
        config,
        transport=httpx.MockTransport(handler),
        sleep=(sleeps.append if sleeps is not None else lambda s: None),
    )


def completion(text):
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


def test_chat_request_validation():
    with pytest.raises(PreconditionError):
        ChatRequest(())
    with pytest.raises(PreconditionError):
        ChatRequest.single("x", temperature=2.5)


def test_chat_payload_and_auth(monkeypatch):
    monkeypatch.setenv("AOP_API_KEY", "sekret")
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("authorization")
        seen["url"] = str(request.url)
        seen["body"] = json.loads(request.content)
        return completion("hello")

    req = ChatRequest(
        (ChatMessage("user", "look", (MediaAttachment("media/seg_0001.mp4", 0.0, 30.0),)),), temperature=1.0
    )
    assert client(handler).chat(req) == "hello"
    assert seen["auth"] == "Bearer sekret"
    assert seen["url"] == "http://test/v1/chat/completions"
    body = seen["body"]
    assert body["model"] == "qwen3-omni" and body["temperature"] == 1.0
    parts = body["messages"][0]["content"]
    assert parts[0] == {"type": "text", "text": "look"}
    assert parts[1]["video_url"] == {"url": "media/seg_0001.mp4", "time_range": [0.0, 30.0]}


def test_retry_then_success_with_backoff():
    statuses = iter([503, 429, 200])
    sleeps = []

    def handler(request):
        code = next(statuses)
        return completion("ok") if code == 200 else httpx.Response(code)

    c = client(handler, sleeps)
    assert c.chat(ChatRequest.single("x")) == "ok"
    assert c.attempts == 3
    assert sleeps == [1.0, 2.0]


def test_retries_exhausted():
    sleeps = []

    def handler(request):
        raise httpx.ConnectError("refused")

    c = client(handler, sleeps, max_retries=3)
    with pytest.raises(TransportError):
        c.chat(ChatRequest.single("x"))
    assert c.attempts == 4
    assert sleeps == [1.0, 2.0, 4.0]


def test_max_retries_zero_single_attempt():
    def handler(request):
        raise httpx.ConnectError("refused")

    c = client(handler, max_retries=0)
    with pytest.raises(TransportError):
        c.chat(ChatRequest.single("x"))
    assert c.attempts == 1


def test_client_error_not_retried():
    c = client(lambda r: httpx.Response(400, text="bad"), max_retries=3)
    with pytest.raises(TransportError, match="400"):
        c.chat(ChatRequest.single("x"))
    assert c.attempts == 1


def test_malformed_payload_is_protocol_error():
    c = client(lambda r: httpx.Response(200, json={"nope": 1}))
    with pytest.raises(ProtocolError):
        c.chat(ChatRequest.single("x"))


def test_budget_rejected_before_sending():
    def handler(request):  # pragma: no cover - must not be reached
        raise AssertionError("sent")

    c = client(handler, context_budget_tokens=10)
    with pytest.raises(ContextBudgetError):
        c.chat(ChatRequest.single("x" * 41))
    assert c.attempts == 0


def test_embeddings_sorted_and_normalized():
    def handler(request):
        body = json.loads(request.content)
        assert body["model"] == "bge-m3"
        return httpx.Response(200, json={"data": [{"index": 1, "embedding": [0, 2]}, {"index": 0, "embedding": [3, 4]}]})

    vecs = client(handler).embed_batch(["a", "b"])
    assert np.allclose(vecs[0], [0.6, 0.8]) and np.allclose(vecs[1], [0, 1])


def test_embedding_dimension_mismatch():
    handler = lambda r: httpx.Response(200, json={"data": [{"index": 0, "embedding": [1, 0]}, {"index": 1, "embedding": [1]}]})
    with pytest.raises(ProtocolError):
        client(handler).embed_batch(["a", "b"])
    with pytest.raises(ProtocolError):
        normalize_rows([[0.0, 0.0]])
    with pytest.raises(ProtocolError):
        normalize_rows([[float("nan"), 1.0]])


def test_scripted_rules():
    chat = ScriptedChatBackend(
        [("PLAN", "canned plan"), (re.compile(r"reflect\w*"), "canned verdict"), (lambda r: r.temperature > 1, "hot")],
        default=lambda r: r.text.upper(),
    )
    assert chat.chat(ChatRequest.single("please PLAN this")) == "canned plan"
    assert chat.chat(ChatRequest.single("reflecting")) == "canned verdict"
    assert chat.chat(ChatRequest.single("x", temperature=1.5)) == "hot"
    assert chat.chat(ChatRequest.single("abc")) == "ABC"
    assert len(chat.calls) == 4
    with pytest.raises(ProtocolError):
        ScriptedChatBackend([]).chat(ChatRequest.single("x"))


def test_sequence_and_replay():
    seq = SequenceChatBackend(["one", "two"])
    reqs = [ChatRequest.single("a"), ChatRequest.single("b")]
    log = [{"request": r.to_dict(), "response": seq.chat(r)} for r in reqs]
    with pytest.raises(ProtocolError):
        seq.chat(reqs[0])
    replay = ReplayChatBackend(log)
    assert [replay.chat(r) for r in reqs] == ["one", "two"]
    assert replay.exhausted
    with pytest.raises(ProtocolError, match="diverged"):
        ReplayChatBackend(log).chat(ChatRequest.single("zzz"))


def test_bow_embedder_properties():
    emb = BagOfWordsEmbedder(1024)
    a, b = emb.embed_batch(["the red oven", "the red oven"])
    assert np.array_equal(a, b) and float(a @ b) == pytest.approx(1.0)
    c, d = emb.embed_batch(["alpha beta", "gamma delta"])
    assert float(c @ d) == 0.0 or emb.bucket("alpha") in {emb.bucket("gamma"), emb.bucket("delta")}
    (e,) = emb.embed_batch([""])
    assert np.linalg.norm(e) == pytest.approx(1.0)


def test_hash_embedder_seeded():
    a = HashEmbedder(64, seed=5).embed_batch(["x", "y"])
    b = HashEmbedder(64, seed=5).embed_batch(["x", "y"])
    c = HashEmbedder(64, seed=6).embed_batch(["x"])
    assert a[0].tobytes() == b[0].tobytes() and a[1].tobytes() == b[1].tobytes()
    assert a[0].tobytes() != c[0].tobytes()


@settings(max_examples=100, deadline=None)
@given(st.lists(st.text(max_size=40), min_size=1, max_size=8))
def test_embedders_unit_norm_and_order(texts):
    for emb in (BagOfWordsEmbedder(128), HashEmbedder(32, 1)):
        batch = emb.embed_batch(texts)
        assert len(batch) == len(texts)
        for t, v in zip(texts, batch):
            assert abs(np.linalg.norm(v) - 1.0) < 1e-6
            assert np.array_equal(v, emb.embed_batch([t])[0])
        for u in batch:
            for v in batch:
                cos = float(u @ v)
                assert -1 - 1e-9 <= cos <= 1 + 1e-9
                assert cos == pytest.approx(float(v @ u))


def test_transcript_file(tmp_path, caplog):
    path = tmp_path / "v.json"
    path.write_text(json.dumps([
        {"start": 0, "end": 4, "text": "a"},
        {"start": 5, "end": 9, "text": "b"},
        {"start": 10, "end": 12, "text": "c"},
    ]))
    utts = FileTranscriptProvider().transcribe(path)
    assert [u.text for u in utts] == ["a", "b", "c"]
    with caplog.at_level("WARNING"):
        assert len(parse_transcript([{"start": 3, "end": 3, "text": "x"}, {"start": 0, "end": 1}])) == 1
    assert "dropping" in caplog.text
    assert parse_transcript([]) == []


def test_transcript_errors_name_path(tmp_path):
    with pytest.raises(IngestionError) as info:
        FileTranscriptProvider().transcribe(tmp_path / "missing.json")
    assert "missing.json" in str(info.value)
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    with pytest.raises(IngestionError, match="bad.json"):
        FileTranscriptProvider().transcribe(bad)
