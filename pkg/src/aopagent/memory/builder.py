"""Memory construction: segmentation, per-segment annotation, global synthesis."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Mapping, Sequence

from ..backends.base import (
    BUILD_TEMPERATURE,
    DEFAULT_CONTEXT_BUDGET,
    Backends,
    ChatBackend,
    ChatMessage,
    ChatRequest,
    EmbeddingBackend,
    MediaAttachment,
)
from ..errors import AnnotationError, BackendError, MemoryBuildError, PreconditionError
from ..prompting import load_prompt, render
from ..structured import ParseError, extract_json_object
from ..text import approx_tokens
from .segmentation import (
    assign_fine_clips,
    derive_fine_clips,
    sanitize_utterances,
    segment_utterances,
    tile_segments,
    uniform_segments,
)
from .types import HierarchicalMemory, MidSegment, SegmentAnnotation, SegmentationConfig, Utterance

log = logging.getLogger(__name__)

ANNOTATION_FIELDS = ("visual_keypoints", "audio_keypoints", "keywords", "description")

MediaRefs = Mapping[int, str] | Callable[[MidSegment], str | None] | str | None


def _string_list(obj: dict, key: str) -> tuple[str, ...]:
    value = obj.get(key)
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ParseError(f'"{key}" must be a list of strings')
    return tuple(v.strip() for v in value if v.strip())


def parse_annotation_fields(raw: str) -> dict:
    obj = extract_json_object(raw)
    missing = [f for f in ANNOTATION_FIELDS if f not in obj]
    if missing:
        raise ParseError(f"missing field(s): {', '.join(missing)}")
    desc = obj["description"]
    if not isinstance(desc, str) or not desc.strip():
        raise ParseError('"description" must be a non-empty string')
    return {
        "visual_keypoints": _string_list(obj, "visual_keypoints"),
        "audio_keypoints": _string_list(obj, "audio_keypoints"),
        "keywords": _string_list(obj, "keywords"),
        "description": desc.strip(),
    }


def _segment_header(segment: MidSegment) -> str:
    return f"Segment {segment.index}, {segment.start:.1f}s to {segment.end:.1f}s"


def annotate_segment(
    segment: MidSegment,
    chat_backend: ChatBackend,
    embed_backend: EmbeddingBackend,
    *,
    media_root: str | Path | None = None,
    temperature: float = BUILD_TEMPERATURE,
    prompts_dir: str | Path | None = None,
) -> SegmentAnnotation:
    """Ask the omni model for keypoints, keywords and a description, then embed them.

    A malformed reply gets exactly one corrective retry.
    """
    prompt = render(
        load_prompt("annotate", prompts_dir),
        segment=_segment_header(segment),
        transcript=segment.transcript or "(no speech)",
    )
    media: tuple[MediaAttachment, ...] = ()
    if segment.media_ref:
        path = Path(media_root) / segment.media_ref if media_root else Path(segment.media_ref)
        media = (MediaAttachment(str(path), segment.start, segment.end),)
    messages = [ChatMessage("user", prompt, media)]

    fields = None
    raw = ""
    for attempt in range(2):
        try:
            raw = chat_backend.chat(ChatRequest(tuple(messages), temperature=temperature))
        except BackendError as exc:
            exc.segment_index = segment.index
            raise
        try:
            fields = parse_annotation_fields(raw)
            break
        except ParseError as exc:
            if attempt == 1:
                raise AnnotationError(f"malformed annotation after retry ({exc})", segment.index, raw) from exc
            log.info("segment %d: malformed annotation, retrying (%s)", segment.index, exc)
            messages += [
                ChatMessage("assistant", raw),
                ChatMessage("user", render(load_prompt("correction", prompts_dir), error=str(exc))),
            ]

    keypoints = fields["visual_keypoints"] + fields["audio_keypoints"]
    try:
        vectors = embed_backend.embed_batch([fields["description"], *keypoints])
    except BackendError as exc:
        exc.segment_index = segment.index
        raise
    as_tuple = lambda v: tuple(float(x) for x in v)  # noqa: E731
    return SegmentAnnotation(
        segment_index=segment.index,
        visual_keypoints=fields["visual_keypoints"],
        audio_keypoints=fields["audio_keypoints"],
        keywords=fields["keywords"],
        description=fields["description"],
        embedding_desc=as_tuple(vectors[0]),
        embedding_keypoints=tuple(as_tuple(v) for v in vectors[1:]),
    )


def _numbered(descriptions: Sequence[str], offset: int = 0) -> str:
    return "\n".join(f"{offset + i}. {d}" for i, d in enumerate(descriptions, 1))


def _chunk(descriptions: Sequence[str], limit_tokens: int) -> list[list[str]]:
    chunks: list[list[str]] = [[]]
    used = 0
    for d in descriptions:
        cost = approx_tokens(d) + 2
        if chunks[-1] and used + cost > limit_tokens:
            chunks.append([])
            used = 0
        chunks[-1].append(d)
        used += cost
    return chunks


def synthesize_global(
    descriptions: Sequence[str],
    chat_backend: ChatBackend,
    *,
    context_budget_tokens: int = DEFAULT_CONTEXT_BUDGET,
    temperature: float = BUILD_TEMPERATURE,
    prompts_dir: str | Path | None = None,
) -> str:
    """Summarise segment descriptions into one video-level paragraph.

    If the descriptions exceed three quarters of the context budget they are
    summarised chunk by chunk first, then the chunk summaries are synthesised.
    """
    if not descriptions:
        raise PreconditionError("global synthesis needs at least one description")
    limit = (3 * context_budget_tokens) // 4

    def call(template: str, items: Sequence[str], offset: int = 0) -> str:
        text = render(load_prompt(template, prompts_dir), descriptions=_numbered(items, offset))
        return chat_backend.chat(ChatRequest.single(text, temperature=temperature)).strip()

    items = list(descriptions)
    while approx_tokens(_numbered(items)) > limit and len(items) > 1:
        chunks = _chunk(items, limit)
        if len(chunks) == 1 or len(chunks) == len(items):
            break
        summaries = []
        offset = 0
        for chunk in chunks:
            summaries.append(call("synthesize_chunk", chunk, offset))
            offset += len(chunk)
        items = summaries
    return call("synthesize", items)


def _media_ref(media_refs: MediaRefs, segment: MidSegment) -> str | None:
    if media_refs is None:
        return None
    if isinstance(media_refs, str):
        return media_refs.format(index=segment.index)
    if callable(media_refs):
        return media_refs(segment)
    return media_refs.get(segment.index)


def build_memory(
    video_id: str,
    duration: float,
    utterances: Sequence[Utterance],
    backends: Backends,
    config: SegmentationConfig | None = None,
    *,
    workers: int = 1,
    media_refs: MediaRefs = None,
    media_root: str | Path | None = None,
    context_budget_tokens: int = DEFAULT_CONTEXT_BUDGET,
    temperature: float = BUILD_TEMPERATURE,
    prompts_dir: str | Path | None = None,
) -> HierarchicalMemory:
    """Run the full construction pipeline for one video.

    ``media_refs`` may be a format string such as ``"media/seg_{index:04d}.mp4"``,
    a mapping from segment index to path, or a callable.
    """
    if not duration > 0:
        raise PreconditionError("duration must be positive")
    config = config or SegmentationConfig()
    config.validate()

    utterances = sanitize_utterances(utterances, duration)
    raw = segment_utterances(utterances, config) if utterances else uniform_segments(duration, config)
    segments = tile_segments(raw, duration)
    clips = derive_fine_clips(utterances, segments, config, duration)
    segments = assign_fine_clips(segments, clips)
    segments = [
        MidSegment(s.index, s.start, s.end, s.transcript, _media_ref(media_refs, s), s.fine_clip_indices)
        for s in segments
    ]

    def annotate(seg: MidSegment) -> SegmentAnnotation:
        return annotate_segment(
            seg,
            backends.chat,
            backends.embed,
            media_root=media_root,
            temperature=temperature,
            prompts_dir=prompts_dir,
        )

    annotations: list[SegmentAnnotation] = []
    try:
        if workers <= 1:
            for seg in segments:
                annotations.append(annotate(seg))
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(annotate, seg) for seg in segments]
                for fut in futures:
                    annotations.append(fut.result())
    except Exception as exc:
        raise MemoryBuildError("annotate", exc, annotations) from exc

    dims = {len(a.embedding_desc) for a in annotations}
    dims |= {len(v) for a in annotations for v in a.embedding_keypoints}
    if len(dims) != 1:
        raise MemoryBuildError("annotate", ValueError(f"inconsistent embedding dims {sorted(dims)}"), annotations)

    try:
        global_desc = synthesize_global(
            [a.description for a in annotations],
            backends.chat,
            context_budget_tokens=context_budget_tokens,
            temperature=temperature,
            prompts_dir=prompts_dir,
        )
    except Exception as exc:
        raise MemoryBuildError("synthesize", exc, annotations) from exc

    memory = HierarchicalMemory(
        video_id=video_id,
        duration=float(duration),
        fine_clips=tuple(clips),
        mid_segments=tuple(segments),
        annotations=tuple(annotations),
        global_description=global_desc,
        embedding_dim=dims.pop(),
        build_config=config,
    )
    log.info("built memory %s: %d mid segments, %d fine clips", video_id, memory.n_mid, memory.n_fine)
    return memory
