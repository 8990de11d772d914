"""Backend request types and the chat / embedding interfaces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from ..errors import ConfigError, PreconditionError, ProtocolError
from ..text import approx_tokens

BUILD_TEMPERATURE = 1.0
LOOP_TEMPERATURE = 0.2
DEFAULT_CONTEXT_BUDGET = 32_768


@dataclass(frozen=True)
class MediaAttachment:
    path: str
    start_s: float | None = None
    end_s: float | None = None


@dataclass(frozen=True)
class ChatMessage:
    role: str
    text: str
    media: tuple[MediaAttachment, ...] = ()


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[ChatMessage, ...]
    temperature: float = LOOP_TEMPERATURE
    max_output_tokens: int = 2048

    def __post_init__(self) -> None:
        if not self.messages:
            raise PreconditionError("chat request needs at least one message")
        if not 0.0 <= self.temperature <= 2.0:
            raise PreconditionError(f"temperature {self.temperature} outside [0, 2]")

    @classmethod
    def single(cls, text: str, *, system: str | None = None, **kwargs) -> "ChatRequest":
        msgs = []
        if system:
            msgs.append(ChatMessage("system", system))
        msgs.append(ChatMessage("user", text))
        return cls(messages=tuple(msgs), **kwargs)

    def prompt_tokens(self) -> int:
        return sum(approx_tokens(m.text) for m in self.messages)

    @property
    def text(self) -> str:
        """All message text joined; what rule-based backends match against."""
        return "\n".join(m.text for m in self.messages)

    def to_dict(self) -> dict:
        return {
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "messages": [
                {
                    "role": m.role,
                    "text": m.text,
                    "media": [
                        {"path": a.path, "start_s": a.start_s, "end_s": a.end_s} for a in m.media
                    ],
                }
                for m in self.messages
            ],
        }


@dataclass(frozen=True)
class BackendConfig:
    base_url: str = "http://localhost:8000/v1"
    model_name: str = "qwen3-omni"
    embedding_model: str = "bge-m3"
    api_key_env_var: str = "AOP_API_KEY"
    timeout_s: float = 120.0
    max_retries: int = 3
    context_budget_tokens: int = DEFAULT_CONTEXT_BUDGET
    backoff_base_s: float = 1.0
    backoff_factor: float = 2.0

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.timeout_s <= 0:
            raise ConfigError("timeout_s must be positive")
        if self.context_budget_tokens <= 0:
            raise ConfigError("context_budget_tokens must be positive")


@runtime_checkable
class ChatBackend(Protocol):
    def chat(self, request: ChatRequest) -> str: ...


@runtime_checkable
class EmbeddingBackend(Protocol):
    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]: ...


@dataclass
class Backends:
    """The chat and embedding clients a build or a run needs."""

    chat: ChatBackend
    embed: EmbeddingBackend
    extra: dict = field(default_factory=dict)


def normalize_rows(vectors: Sequence[Sequence[float]]) -> list[np.ndarray]:
    """Unit-normalize every vector; rejects ragged batches and non-finite values."""
    if not vectors:
        return []
    dims = {len(v) for v in vectors}
    if len(dims) != 1:
        raise ProtocolError(f"embedding dimension mismatch within batch: {sorted(dims)}")
    arr = np.asarray(vectors, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ProtocolError("embedding contains non-finite values")
    norms = np.linalg.norm(arr, axis=1)
    if np.any(norms == 0.0):
        raise ProtocolError("embedding backend returned a zero vector")
    return list(arr / norms[:, None])

