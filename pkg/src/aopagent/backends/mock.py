"""Deterministic offline backends for tests, demos and replay."""

from __future__ import annotations

import hashlib
import re
import threading
from collections import Counter
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from ..errors import PreconditionError, ProtocolError
from ..text import tokenize
from .base import ChatRequest

Matcher = Union[str, "re.Pattern[str]", Callable[[ChatRequest], bool]]
Reply = Union[str, Callable[[ChatRequest], str]]


def _matches(matcher: Matcher, request: ChatRequest) -> bool:
    if isinstance(matcher, str):
        return matcher in request.text
    if isinstance(matcher, re.Pattern):
        return matcher.search(request.text) is not None
    return bool(matcher(request))


class ScriptedChatBackend:
    """Answers from an ordered rule table: first matching rule wins.

    Each rule is ``(matcher, reply)``. A matcher is a substring, a compiled
    regex, or a predicate over the request; a reply is a fixed string or a
    function of the request. With pure reply functions the backend is a pure
    function of (rules, request).
    """

    def __init__(self, rules: Iterable[tuple[Matcher, Reply]], default: Reply | None = None):
        self.rules = list(rules)
        self.default = default
        self.calls: list[ChatRequest] = []
        self._lock = threading.Lock()

    def chat(self, request: ChatRequest) -> str:
        with self._lock:
            self.calls.append(request)
        for matcher, reply in self.rules:
            if _matches(matcher, request):
                return reply(request) if callable(reply) else reply
        if self.default is None:
            raise ProtocolError("no scripted rule matched the request")
        return self.default(request) if callable(self.default) else self.default


class SequenceChatBackend:
    """Returns canned replies in order; raises once the script runs out."""

    def __init__(self, replies: Sequence[str]):
        self._replies = list(replies)
        self._pos = 0
        self.calls: list[ChatRequest] = []
        self._lock = threading.Lock()

    def chat(self, request: ChatRequest) -> str:
        with self._lock:
            self.calls.append(request)
            if self._pos >= len(self._replies):
                raise ProtocolError("scripted sequence exhausted")
            reply = self._replies[self._pos]
            self._pos += 1
        return reply


class ReplayChatBackend:
    """Replays recorded ``{"request": ..., "response": ...}`` exchanges.

    Each incoming request must equal the recorded one, so a diverging replay
    fails loudly instead of silently returning the wrong answer.
    """

    def __init__(self, exchanges: Sequence[dict]):
        self._exchanges = list(exchanges)
        self._pos = 0
        self._lock = threading.Lock()

    def chat(self, request: ChatRequest) -> str:
        with self._lock:
            if self._pos >= len(self._exchanges):
                raise ProtocolError("replay log exhausted")
            rec = self._exchanges[self._pos]
            self._pos += 1
        if rec["request"] != request.to_dict():
            raise ProtocolError(f"replay diverged at exchange {self._pos}")
        return rec["response"]

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._exchanges)


def _stable_hash(*parts: str) -> int:
    h = hashlib.blake2b("\x1f".join(parts).encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "little")


class BagOfWordsEmbedder:
    """Hashed term-frequency embedder whose cosine tracks token overlap.

    Tokens hash into buckets ``1..dim-1``; bucket 0 is reserved for empty
    text so every output is a unit vector.
    """

    def __init__(self, dim: int = 1024):
        if dim < 2:
            raise PreconditionError("dim must be at least 2")
        self.dim = dim

    def bucket(self, token: str) -> int:
        return 1 + _stable_hash("bow", token) % (self.dim - 1)

    def embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        counts = Counter(self.bucket(tok) for tok in tokenize(text))
        if not counts:
            vec[0] = 1.0
            return vec
        for b, c in counts.items():
            vec[b] = c
        return vec / np.linalg.norm(vec)

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise PreconditionError("embed_batch needs at least one text")
        return [self.embed_one(t) for t in texts]


class HashEmbedder:
    """Seeded pseudo-random embedder: deterministic but semantically uninformative."""

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 1:
            raise PreconditionError("dim must be positive")
        self.dim = dim
        self.seed = seed

    def embed_one(self, text: str) -> np.ndarray:
        rng = np.random.default_rng(_stable_hash(str(self.seed), text))
        vec = rng.standard_normal(self.dim)
        return vec / np.linalg.norm(vec)

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise PreconditionError("embed_batch needs at least one text")
        return [self.embed_one(t) for t in texts]
