"""Benchmark sweeps in agent mode or single-call direct mode."""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from ..agent.loop import TRACE_SCHEMA_VERSION, TraceRecorder, dump_trace, extract_option, format_options, run
from ..agent.state import LoopConfig
from ..backends.base import ChatBackend, ChatMessage, ChatRequest, EmbeddingBackend, MediaAttachment
from ..errors import PreconditionError
from ..memory.storage import load_memory
from ..memory.types import HierarchicalMemory
from ..prompting import load_prompt, render
from .dataset import PredictionRecord, QuestionRecord

log = logging.getLogger(__name__)

MODES = ("agent", "direct")


class MemoryCache:
    """Loads each video's memory once; safe to share across workers."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._cache: dict[str, HierarchicalMemory] = {}
        self._lock = threading.Lock()

    def get(self, video_id: str) -> HierarchicalMemory:
        with self._lock:
            if video_id not in self._cache:
                self._cache[video_id] = load_memory(self.root / video_id)
            return self._cache[video_id]


def full_transcript(memory: HierarchicalMemory) -> str:
    lines = []
    for seg in memory.mid_segments:
        if seg.transcript:
            lines.append(f"[{seg.start:.1f}-{seg.end:.1f}s] {seg.transcript}")
    return "\n".join(lines) or "(no speech)"


def direct_answer(
    q: QuestionRecord,
    memory: HierarchicalMemory,
    chat: ChatBackend,
    *,
    config: LoopConfig | None = None,
    media_root: str | Path | None = None,
    prompts_dir: str | Path | None = None,
) -> tuple[str | None, dict]:
    """One chat call over the global description and the full transcript."""
    config = config or LoopConfig()
    prompt = render(
        load_prompt("direct", prompts_dir),
        question=q.question,
        options=format_options(q.options),
        global_description=memory.global_description,
        transcript=full_transcript(memory),
    )
    media: tuple[MediaAttachment, ...] = ()
    if config.evidence_mode == "media_attach":
        media = tuple(
            MediaAttachment(str(Path(media_root) / s.media_ref if media_root else s.media_ref), s.start, s.end)
            for s in memory.mid_segments
            if s.media_ref
        )
    rec = TraceRecorder(chat)
    text = rec.chat(
        ChatRequest((ChatMessage("user", prompt, media),), temperature=config.reasoner_temperature),
        agent="direct",
    )
    letter, _ = extract_option(text, q.letters)
    trace = {
        "schema_version": TRACE_SCHEMA_VERSION,
        "mode": "direct",
        "question_id": q.id,
        "video_id": q.video_id,
        "exchanges": rec.exchanges,
        "rounds": [],
        "answer": {"text": text, "extracted_option": letter},
    }
    return letter, trace


def run_eval(
    dataset: Sequence[QuestionRecord],
    memory_root: str | Path,
    mode: str = "agent",
    workers: int = 1,
    *,
    chat: ChatBackend,
    embedder: EmbeddingBackend,
    config: LoopConfig | None = None,
    trace_dir: str | Path | None = None,
    prompts_dir: str | Path | None = None,
) -> list[PredictionRecord]:
    """Answer every question; per-question failures become records with ``predicted=None``.

    Results come back in dataset order whatever the worker count.
    """
    if mode not in MODES:
        raise PreconditionError(f"mode must be one of {MODES}")
    config = config or LoopConfig()
    memories = MemoryCache(memory_root)
    if trace_dir is not None:
        Path(trace_dir).mkdir(parents=True, exist_ok=True)

    def one(q: QuestionRecord) -> PredictionRecord:
        try:
            memory = memories.get(q.video_id)
            media_root = memories.root / q.video_id
            if mode == "agent":
                result = run(
                    q.question,
                    memory,
                    config,
                    chat=chat,
                    embedder=embedder,
                    options=q.options,
                    question_id=q.id,
                    media_root=media_root,
                    prompts_dir=prompts_dir,
                )
                letter, rounds, trace, error = result.extracted_option, result.rounds_used, result.trace, result.error
            else:
                letter, trace = direct_answer(
                    q, memory, chat, config=config, media_root=media_root, prompts_dir=prompts_dir
                )
                rounds, error = 0, None
        except Exception as exc:  # one bad question must not stop the sweep
            log.warning("question %s failed: %s", q.id, exc)
            return PredictionRecord(q.id, None, 0, None, f"{type(exc).__name__}: {exc}")
        ref = None
        if trace_dir is not None:
            path = Path(trace_dir) / f"{q.id}.json"
            path.write_text(dump_trace(trace), encoding="utf-8")
            ref = str(path)
        return PredictionRecord(q.id, letter, rounds, ref, error)

    if workers <= 1:
        return [one(q) for q in dataset]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, dataset))
