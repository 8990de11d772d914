"""OpenAI-compatible HTTP client for chat completions and embeddings."""

from __future__ import annotations

import logging
import os
import time
from typing import Callable, Sequence

import httpx
import numpy as np

from ..errors import PreconditionError, ProtocolError, TransportError
from .base import BackendConfig, ChatRequest, normalize_rows

log = logging.getLogger(__name__)

_RETRY_STATUS = {429, 500, 502, 503, 504}


class ContextBudgetError(PreconditionError):
    pass


def _message_payload(msg) -> dict:
    if not msg.media:
        return {"role": msg.role, "content": msg.text}
    parts: list[dict] = [{"type": "text", "text": msg.text}]
    for a in msg.media:
        part = {"type": "video_url", "video_url": {"url": a.path}}
        if a.start_s is not None or a.end_s is not None:
            part["video_url"]["time_range"] = [a.start_s, a.end_s]
        parts.append(part)
    return {"role": msg.role, "content": parts}


class OpenAICompatibleClient:
    """Chat + embedding client speaking the OpenAI wire protocol.

    Transient failures (timeouts, connection errors, 429 and 5xx) are retried
    up to ``max_retries`` times with exponential backoff.
    """

    def __init__(
        self,
        config: BackendConfig | None = None,
        *,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config or BackendConfig()
        api_key = os.environ.get(self.config.api_key_env_var, "")
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._http = httpx.Client(
            base_url=self.config.base_url.rstrip("/"),
            headers=headers,
            timeout=self.config.timeout_s,
            transport=transport,
        )
        self._sleep = sleep
        self.attempts = 0

    def close(self) -> None:
        self._http.close()

    def _post(self, path: str, payload: dict) -> dict:
        cfg = self.config
        last: Exception | None = None
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                self._sleep(cfg.backoff_base_s * cfg.backoff_factor ** (attempt - 1))
            self.attempts += 1
            try:
                resp = self._http.post(path, json=payload)
            except (httpx.TimeoutException, httpx.TransportError) as exc:
                last = exc
                log.warning("%s attempt %d failed: %s", path, attempt + 1, exc)
                continue
            if resp.status_code in _RETRY_STATUS:
                last = TransportError(f"HTTP {resp.status_code} from {path}")
                log.warning("%s attempt %d got HTTP %d", path, attempt + 1, resp.status_code)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code} from {path}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise ProtocolError(f"non-JSON response from {path}") from exc
        raise TransportError(f"{path} failed after {cfg.max_retries + 1} attempt(s): {last}")

    def chat(self, request: ChatRequest) -> str:
        budget = self.config.context_budget_tokens
        if request.prompt_tokens() > budget:
            raise ContextBudgetError(
                f"prompt of ~{request.prompt_tokens()} tokens exceeds the {budget}-token budget"
            )
        payload = {
            "model": self.config.model_name,
            "messages": [_message_payload(m) for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        body = self._post("/chat/completions", payload)
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed chat completion payload: {str(body)[:200]}") from exc
        if not isinstance(content, str):
            raise ProtocolError("chat completion content is not a string")
        return content

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            raise PreconditionError("embed_batch needs at least one text")
        body = self._post("/embeddings", {"model": self.config.embedding_model, "input": list(texts)})
        try:
            data = sorted(body["data"], key=lambda d: d["index"])
            vectors = [d["embedding"] for d in data]
        except (KeyError, TypeError) as exc:
            raise ProtocolError("malformed embeddings payload") from exc
        if len(vectors) != len(texts):
            raise ProtocolError(f"expected {len(texts)} embeddings, got {len(vectors)}")
        return normalize_rows(vectors)
