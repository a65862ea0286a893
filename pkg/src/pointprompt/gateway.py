"""Clients for the model under evaluation and the sentence-embedding service.

Wire protocol::

    POST {MODEL_URL}/v1/describe  {"request_id", "image_b64", "prompt"} -> {"request_id", "text"}
    POST {EMBED_URL}/v1/embed     {"texts": [...]}                      -> {"vectors": [[...], ...]}

``OpenAIChatGateway`` speaks ``/v1/chat/completions`` instead. The mock
classes give deterministic offline behaviour for tests and dry runs.
"""
from __future__ import annotations

import base64
import hashlib
import io
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import httpx
import numpy as np
from PIL import Image

from .errors import BackendError, BackendTimeout, DecodeError, PointPromptError, ValidationError

log = logging.getLogger(__name__)

RETRY_STATUSES = (408, 429, 500, 502, 503, 504)


@dataclass(frozen=True)
class ChatRequest:
    image: bytes
    prompt: str
    request_id: str

    def __post_init__(self):
        if not self.prompt:
            raise ValidationError("prompt must be non-empty")

    @classmethod
    def from_array(cls, image, prompt, request_id) -> "ChatRequest":
        return cls(encode_png(image), prompt, request_id)

    def to_wire(self) -> dict:
        return {"request_id": self.request_id, "image_b64": base64.b64encode(self.image).decode("ascii"),
                "prompt": self.prompt}


@dataclass(frozen=True)
class ChatResponse:
    request_id: str
    text: str


def encode_png(image) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.array(im.convert("RGB"))


# ---------------------------------------------------------------- matching

def tokenize(text: str) -> list[str]:
    return re.findall(r"[a-z0-9]+", text.lower())


def _contains_run(tokens, sub) -> bool:
    n = len(sub)
    return n > 0 and any(tokens[i:i + n] == sub for i in range(len(tokens) - n + 1))


def token_overlap_match(response: str, categories) -> int:
    """Index of the best category by token Jaccard overlap.

    A category whose token sequence appears verbatim in the response wins
    outright (the longest such name, then the lowest index).
    """
    if not categories:
        raise ValidationError("category list is empty")
    resp = tokenize(response)
    cats = [tokenize(c) for c in categories]
    hits = [i for i, c in enumerate(cats) if _contains_run(resp, c)]
    if hits:
        return max(hits, key=lambda i: (len(cats[i]), -i))
    rs = set(resp)
    best, best_score = 0, -1.0
    for i, c in enumerate(cats):
        cs = set(c)
        union = rs | cs
        score = len(rs & cs) / len(union) if union else 0.0
        if score > best_score:
            best, best_score = i, score
    return best


def cosine(a, b) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def embedding_match(response: str, categories, embedder) -> int:
    if not categories:
        raise ValidationError("category list is empty")
    vecs = embedder.embed([response, *categories])
    sims = [cosine(vecs[0], v) for v in vecs[1:]]
    return int(np.argmax(sims))


def match_category(response: str, categories, matcher: str = "token", embedder=None) -> int:
    """Map a free-form answer to a category index (ties -> lowest index)."""
    if matcher == "token":
        return token_overlap_match(response, categories)
    if matcher == "embedding":
        if embedder is None:
            raise ValidationError("embedding matcher needs an embedder")
        return embedding_match(response, categories, embedder)
    raise ValidationError(f"unknown matcher {matcher!r}")


# ---------------------------------------------------------------- mocks

class HashedBagEmbedder:
    """Deterministic bag-of-tokens embedding: each token adds 1 to a hashed bucket."""

    def __init__(self, dim: int = 1 << 16):
        self.dim = dim

    def _bucket(self, token):
        d = hashlib.blake2b(token.encode(), digest_size=8).digest()
        return int.from_bytes(d, "little") % self.dim

    def embed(self, texts) -> list[np.ndarray]:
        texts = list(texts)
        if not texts:
            raise ValidationError("embed() needs at least one text")
        out = []
        for t in texts:
            v = np.zeros(self.dim)
            for tok in tokenize(t):
                v[self._bucket(tok)] += 1.0
            out.append(v)
        return out


def _unit_hash(*keys) -> float:
    d = hashlib.blake2b("\x00".join(map(str, keys)).encode(), digest_size=8).digest()
    return int.from_bytes(d, "little") / 2.0 ** 64


class MockGateway:
    """Offline stand-in for the model service.

    Answers come from ``answers`` (request id -> text) or from ``responder``,
    a callable taking the :class:`ChatRequest`. Every request is appended to
    ``self.requests``. ``error_rate`` fails a deterministic subset of ids.
    """

    def __init__(self, answers=None, responder=None, default=None, error_rate=0.0, seed=0,
                 embedder=None):
        self.answers = dict(answers or {})
        self.responder = responder
        self.default = default
        self.error_rate = error_rate
        self.seed = seed
        self.embedder = embedder or HashedBagEmbedder()
        self.requests: list[ChatRequest] = []

    @classmethod
    def from_file(cls, path, **kw) -> "MockGateway":
        try:
            answers = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ValidationError(f"{path}: answer key is not valid JSON ({e})") from e
        if not isinstance(answers, dict):
            raise ValidationError(f"{path}: answer key must be a JSON object")
        return cls(answers={str(k): str(v) for k, v in answers.items()}, **kw)

    def chat(self, req: ChatRequest) -> ChatResponse:
        self.requests.append(req)
        if self.error_rate and _unit_hash(self.seed, req.request_id) < self.error_rate:
            raise BackendError(f"mock failure for {req.request_id}", status=503)
        if self.responder is not None:
            return ChatResponse(req.request_id, self.responder(req))
        if req.request_id in self.answers:
            return ChatResponse(req.request_id, self.answers[req.request_id])
        if self.default is not None:
            return ChatResponse(req.request_id, self.default)
        raise BackendError(f"no mock answer for {req.request_id}", status=404)

    def embed(self, texts):
        return self.embedder.embed(texts)


# ---------------------------------------------------------------- HTTP

class HttpGateway:
    """HTTP client with retries, exponential backoff and an in-flight bound."""

    def __init__(self, model_url=None, embed_url=None, api_key=None, timeout=30.0, retries=3,
                 backoff=0.5, max_in_flight=8, transport=None):
        self.model_url = (model_url or "").rstrip("/")
        self.embed_url = (embed_url or model_url or "").rstrip("/")
        self.retries = retries
        self.backoff = backoff
        self.max_in_flight = max_in_flight
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)
        self._slots = threading.BoundedSemaphore(max_in_flight)

    @classmethod
    def from_env(cls, **kw):
        return cls(os.environ.get("MODEL_URL"), os.environ.get("EMBED_URL"), os.environ.get("API_KEY"), **kw)

    def close(self):
        self._client.close()

    def _post(self, url, payload) -> dict:
        if not url:
            raise BackendError("no backend URL configured (set MODEL_URL / EMBED_URL)")
        last = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self._client.post(url, json=payload)
            except httpx.TimeoutException as e:
                last = BackendTimeout(f"timeout calling {url}: {e}")
                continue
            except httpx.TransportError as e:
                last = BackendError(f"transport error calling {url}: {e}")
                continue
            if resp.status_code in RETRY_STATUSES:
                last = BackendError(f"{url} returned {resp.status_code}", status=resp.status_code)
                continue
            if resp.status_code >= 400:
                raise BackendError(f"{url} returned {resp.status_code}", status=resp.status_code)
            try:
                return resp.json()
            except (json.JSONDecodeError, UnicodeDecodeError) as e:
                raise DecodeError(f"malformed JSON from {url}: {e}") from e
        log.warning("giving up on %s after %d attempts", url, self.retries + 1)
        raise last

    def chat(self, req: ChatRequest) -> ChatResponse:
        data = self._post(self.model_url + "/v1/describe", req.to_wire())
        if not isinstance(data, dict) or not isinstance(data.get("text"), str):
            raise DecodeError(f"response for {req.request_id} lacks a 'text' field")
        rid = data.get("request_id", req.request_id)
        if rid != req.request_id:
            raise DecodeError(f"response id {rid!r} does not echo request {req.request_id!r}")
        return ChatResponse(req.request_id, data["text"])

    def embed(self, texts) -> list[np.ndarray]:
        texts = list(texts)
        if not texts:
            raise ValidationError("embed() needs at least one text")
        data = self._post(self.embed_url + "/v1/embed", {"texts": texts})
        try:
            vecs = [np.asarray(v, dtype=np.float64) for v in data["vectors"]]
        except (KeyError, TypeError, ValueError) as e:
            raise DecodeError(f"malformed embedding response: {e!r}") from e
        if len(vecs) != len(texts) or len({v.shape for v in vecs}) != 1 or vecs[0].ndim != 1 \
                or vecs[0].size == 0 or not all(np.isfinite(v).all() for v in vecs):
            raise DecodeError("embedding response has wrong count, shape or non-finite values")
        return vecs


class OpenAIChatGateway(HttpGateway):
    """Adapter for OpenAI-compatible ``/v1/chat/completions`` servers."""

    def __init__(self, model_url=None, embed_url=None, api_key=None, model="default", **kw):
        super().__init__(model_url, embed_url, api_key, **kw)
        self.model = model

    def chat(self, req: ChatRequest) -> ChatResponse:
        image_url = "data:image/png;base64," + base64.b64encode(req.image).decode("ascii")
        payload = {"model": self.model, "messages": [{"role": "user", "content": [
            {"type": "image_url", "image_url": {"url": image_url}},
            {"type": "text", "text": req.prompt}]}]}
        data = self._post(self.model_url + "/v1/chat/completions", payload)
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as e:
            raise DecodeError(f"malformed chat completion: {e!r}") from e
        if not isinstance(text, str):
            raise DecodeError("chat completion content is not a string")
        return ChatResponse(req.request_id, text)


def chat_many(gateway, requests, max_in_flight=8) -> list:
    """Run requests concurrently; results (or the raised exception) in request order."""
    def one(req):
        try:
            return gateway.chat(req)
        except PointPromptError as e:
            return e

    requests = list(requests)
    if max_in_flight <= 1 or len(requests) <= 1:
        return [one(r) for r in requests]
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        return list(pool.map(one, requests))
