import base64
import json
import threading
import time

import httpx
import numpy as np
import pytest

from pointprompt.errors import BackendError, BackendTimeout, DecodeError, ValidationError
from pointprompt.gateway import (ChatRequest, HashedBagEmbedder, HttpGateway, MockGateway, OpenAIChatGateway,
                                 chat_many, cosine, decode_png, match_category, token_overlap_match)

IMG = np.zeros((4, 5, 3), np.uint8)


def req(rid="id1", prompt="What is it?"):
    return ChatRequest.from_array(IMG, prompt, rid)


# ---- mocks

def test_mock_answer_key():
    gw = MockGateway({"id1": "cat"})
    assert gw.chat(req()).text == "cat"
    assert gw.chat(req()).request_id == "id1"
    with pytest.raises(BackendError):
        gw.chat(req("other"))
    assert len(gw.requests) == 3


def test_mock_error_rate():
    with pytest.raises(BackendError):
        MockGateway({"id1": "cat"}, error_rate=1.0).chat(req())


def test_mock_from_file(tmp_path):
    p = tmp_path / "key.json"
    p.write_text(json.dumps({"a": "dog"}))
    assert MockGateway.from_file(p).chat(req("a")).text == "dog"
    p.write_text("{nope")
    with pytest.raises(ValidationError):
        MockGateway.from_file(p)


def test_request_validation():
    with pytest.raises(ValidationError):
        ChatRequest(b"", "", "x")
    r = req()
    assert np.array_equal(decode_png(base64.b64decode(r.to_wire()["image_b64"])), IMG)


# ---- embeddings and matching

def test_embed_determinism():
    a, b = HashedBagEmbedder().embed(["car", "car"])
    assert np.array_equal(a, b)
    with pytest.raises(ValidationError):
        HashedBagEmbedder().embed([])


def test_embed_similarity_order():
    red_car, car, person = HashedBagEmbedder().embed(["red car", "car", "person"])
    assert cosine(red_car, car) == pytest.approx(1 / np.sqrt(2))
    assert cosine(red_car, car) > cosine(red_car, person)


def test_token_overlap_examples():
    assert token_overlap_match("a red car", ["person", "car"]) == 1
    assert token_overlap_match("traffic signal", ["traffic light", "traffic sign"]) == 0
    assert token_overlap_match("Potted plant!", ["plant", "potted plant"]) == 1
    assert token_overlap_match("zzz", ["a", "b"]) == 0
    with pytest.raises(ValidationError):
        token_overlap_match("x", [])


@pytest.mark.parametrize("matcher", ["token", "embedding"])
def test_exact_match_both_matchers(matcher):
    cats = ["person", "dining table", "dog"]
    for i, c in enumerate(cats):
        assert match_category(c, cats, matcher, HashedBagEmbedder()) == i


def test_match_category_errors():
    with pytest.raises(ValidationError):
        match_category("x", ["a"], "embedding")
    with pytest.raises(ValidationError):
        match_category("x", ["a"], "fuzzy")


# ---- HTTP

def transport(handler):
    return httpx.MockTransport(handler)


def test_http_chat_roundtrip():
    seen = {}

    def handler(request):
        body = json.loads(request.content)
        seen.update(body, path=request.url.path, auth=request.headers.get("authorization"))
        return httpx.Response(200, json={"request_id": body["request_id"], "text": "a cat"})

    gw = HttpGateway("http://model", api_key="k", transport=transport(handler))
    assert gw.chat(req("q1")).text == "a cat"
    assert seen["path"] == "/v1/describe" and seen["auth"] == "Bearer k"
    assert seen["prompt"] == "What is it?" and seen["request_id"] == "q1"
    assert np.array_equal(decode_png(base64.b64decode(seen["image_b64"])), IMG)


def test_http_malformed_json():
    gw = HttpGateway("http://m", transport=transport(lambda r: httpx.Response(200, content=b"{not json")))
    with pytest.raises(DecodeError):
        gw.chat(req())
    gw = HttpGateway("http://m", transport=transport(lambda r: httpx.Response(200, json={"x": 1})))
    with pytest.raises(DecodeError):
        gw.chat(req())
    gw = HttpGateway("http://m", transport=transport(
        lambda r: httpx.Response(200, json={"request_id": "other", "text": "x"})))
    with pytest.raises(DecodeError):
        gw.chat(req())


def test_http_retry_then_success():
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) < 3:
            return httpx.Response(503)
        return httpx.Response(200, json={"request_id": "id1", "text": "ok"})

    gw = HttpGateway("http://m", retries=3, backoff=0.001, transport=transport(handler))
    assert gw.chat(req()).text == "ok"
    assert len(calls) == 3


def test_http_retries_exhausted_and_client_errors():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(500)

    gw = HttpGateway("http://m", retries=2, backoff=0.001, transport=transport(handler))
    with pytest.raises(BackendError) as e:
        gw.chat(req())
    assert e.value.status == 500 and len(calls) == 3
    gw = HttpGateway("http://m", retries=5, backoff=0.001, transport=transport(lambda r: httpx.Response(401)))
    with pytest.raises(BackendError) as e:
        gw.chat(req())
    assert e.value.status == 401


def test_http_timeout():
    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    gw = HttpGateway("http://m", retries=1, backoff=0.001, transport=transport(handler))
    start = time.monotonic()
    with pytest.raises(BackendTimeout):
        gw.chat(req())
    assert time.monotonic() - start < 1.0


def test_http_no_url():
    with pytest.raises(BackendError):
        HttpGateway().chat(req())


def test_http_embed():
    def handler(request):
        texts = json.loads(request.content)["texts"]
        assert request.url.path == "/v1/embed"
        return httpx.Response(200, json={"vectors": [[float(len(t)), 1.0] for t in texts]})

    gw = HttpGateway("http://m", "http://e", transport=transport(handler))
    vecs = gw.embed(["a", "bbb"])
    assert [v.tolist() for v in vecs] == [[1.0, 1.0], [3.0, 1.0]]
    bad = HttpGateway("http://m", transport=transport(lambda r: httpx.Response(200, json={"vectors": [[1.0]]})))
    with pytest.raises(DecodeError):
        bad.embed(["a", "b"])
    with pytest.raises(ValidationError):
        gw.embed([])


def test_openai_adapter():
    def handler(request):
        body = json.loads(request.content)
        assert request.url.path == "/v1/chat/completions"
        content = body["messages"][0]["content"]
        assert content[0]["image_url"]["url"].startswith("data:image/png;base64,")
        assert content[1] == {"type": "text", "text": "What is it?"}
        return httpx.Response(200, json={"choices": [{"message": {"content": "dog"}}]})

    gw = OpenAIChatGateway("http://m", model="m1", transport=transport(handler))
    assert gw.chat(req()).text == "dog"
    bad = OpenAIChatGateway("http://m", transport=transport(lambda r: httpx.Response(200, json={"choices": []})))
    with pytest.raises(DecodeError):
        bad.chat(req())


def test_chat_many_order_and_bound():
    active, peak = [0], [0]
    lock = threading.Lock()

    def handler(request):
        body = json.loads(request.content)
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        time.sleep(0.01)
        with lock:
            active[0] -= 1
        if body["request_id"] == "r3":
            return httpx.Response(400)
        return httpx.Response(200, json={"request_id": body["request_id"], "text": body["request_id"].upper()})

    gw = HttpGateway("http://m", max_in_flight=2, transport=transport(handler))
    results = chat_many(gw, [req(f"r{i}") for i in range(8)], max_in_flight=6)
    assert [getattr(r, "text", None) for r in results] == ["R0", "R1", "R2", None, "R4", "R5", "R6", "R7"]
    assert isinstance(results[3], BackendError)
    assert peak[0] <= 2


def test_from_env(monkeypatch):
    monkeypatch.setenv("MODEL_URL", "http://x/")
    monkeypatch.setenv("EMBED_URL", "http://y")
    gw = HttpGateway.from_env()
    assert gw.model_url == "http://x" and gw.embed_url == "http://y"
