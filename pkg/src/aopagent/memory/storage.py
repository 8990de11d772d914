"""Directory persistence for :class:`HierarchicalMemory`.

Layout::

    <dir>/memory.json        manifest, schema_version "1"
    <dir>/media/seg_0001.mp4 optional, referenced relatively by mid segments

Floats are written with ``repr`` precision, so a load after a store gives
back bit-identical values.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

from ..errors import ManifestError, SchemaVersionError
from .types import FineClip, HierarchicalMemory, MidSegment, SegmentAnnotation, SegmentationConfig

SCHEMA_VERSION = "1"
MANIFEST_NAME = "memory.json"


def memory_to_dict(memory: HierarchicalMemory) -> dict:
    cfg = memory.build_config
    return {
        "schema_version": SCHEMA_VERSION,
        "video_id": memory.video_id,
        "duration": memory.duration,
        "embedding_dim": memory.embedding_dim,
        "global_description": memory.global_description,
        "build_config": {
            "merge_threshold_s": cfg.merge_threshold_s,
            "max_duration_s": cfg.max_duration_s,
            "overlap_s": cfg.overlap_s,
            "gap_fill_threshold_s": cfg.gap_fill_threshold_s,
            "no_speech_window_s": cfg.no_speech_window_s,
        },
        "fine_clips": [
            {"index": c.index, "start": c.start, "end": c.end, "text": c.text, "is_gap": c.is_gap}
            for c in memory.fine_clips
        ],
        "mid_segments": [
            {
                "index": s.index,
                "start": s.start,
                "end": s.end,
                "transcript": s.transcript,
                "media_ref": s.media_ref,
                "fine_clip_indices": list(s.fine_clip_indices),
            }
            for s in memory.mid_segments
        ],
        "annotations": [
            {
                "segment_index": a.segment_index,
                "visual_keypoints": list(a.visual_keypoints),
                "audio_keypoints": list(a.audio_keypoints),
                "keywords": list(a.keywords),
                "description": a.description,
                "embedding_desc": list(a.embedding_desc),
                "embedding_keypoints": [list(v) for v in a.embedding_keypoints],
            }
            for a in memory.annotations
        ],
    }


class _Reader:
    """Field accessors that name the offending path on failure."""

    def __init__(self, source: str):
        self.source = source

    def fail(self, path: str, why: str):
        raise ManifestError(f"{self.source}: field {path}: {why}")

    def get(self, obj, key: str, path: str):
        if not isinstance(obj, dict) or key not in obj:
            self.fail(f"{path}.{key}" if path else key, "missing")
        return obj[key]

    def num(self, obj, key: str, path: str) -> float:
        v = self.get(obj, key, path)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(f"{path}.{key}" if path else key, f"expected a finite number, got {v!r}")
        return float(v)

    def integer(self, obj, key: str, path: str) -> int:
        v = self.get(obj, key, path)
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(f"{path}.{key}" if path else key, f"expected an integer, got {v!r}")
        return v

    def text(self, obj, key: str, path: str) -> str:
        v = self.get(obj, key, path)
        if not isinstance(v, str):
            self.fail(f"{path}.{key}" if path else key, "expected a string")
        return v

    def strings(self, obj, key: str, path: str) -> tuple[str, ...]:
        v = self.get(obj, key, path)
        if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
            self.fail(f"{path}.{key}", "expected a list of strings")
        return tuple(v)

    def vector(self, v, path: str, dim: int) -> tuple[float, ...]:
        if not isinstance(v, list):
            self.fail(path, "expected a list of numbers")
        for i, x in enumerate(v):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                self.fail(f"{path}[{i}]", f"expected a finite number, got {x!r}")
        if len(v) != dim:
            self.fail(path, f"length {len(v)} != embedding_dim {dim}")
        return tuple(float(x) for x in v)


def memory_from_dict(data: dict, source: str = MANIFEST_NAME) -> HierarchicalMemory:
    r = _Reader(source)
    if not isinstance(data, dict):
        raise ManifestError(f"{source}: manifest must be a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{source}: schema_version {version!r} is not supported (expected {SCHEMA_VERSION!r})"
        )
    dim = r.integer(data, "embedding_dim", "")
    if dim <= 0:
        r.fail("embedding_dim", "must be a positive integer")
    duration = r.num(data, "duration", "")
    if duration <= 0:
        r.fail("duration", "must be positive")

    cfg_raw = r.get(data, "build_config", "")
    try:
        cfg = SegmentationConfig(
            **{
                k: r.num(cfg_raw, k, "build_config")
                for k in (
                    "merge_threshold_s",
                    "max_duration_s",
                    "overlap_s",
                    "gap_fill_threshold_s",
                    "no_speech_window_s",
                )
            }
        )
    except ValueError as exc:
        if isinstance(exc, ManifestError):
            raise
        r.fail("build_config", str(exc))

    clips = []
    for i, c in enumerate(r.get(data, "fine_clips", "")):
        p = f"fine_clips[{i}]"
        is_gap = r.get(c, "is_gap", p)
        if not isinstance(is_gap, bool):
            r.fail(f"{p}.is_gap", "expected a boolean")
        clips.append(
            FineClip(r.integer(c, "index", p), r.num(c, "start", p), r.num(c, "end", p), r.text(c, "text", p), is_gap)
        )

    segments = []
    for i, s in enumerate(r.get(data, "mid_segments", "")):
        p = f"mid_segments[{i}]"
        media = r.get(s, "media_ref", p)
        if media is not None and not isinstance(media, str):
            r.fail(f"{p}.media_ref", "expected a string or null")
        idx = r.get(s, "fine_clip_indices", p)
        if not isinstance(idx, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in idx):
            r.fail(f"{p}.fine_clip_indices", "expected a list of integers")
        segments.append(
            MidSegment(
                r.integer(s, "index", p),
                r.num(s, "start", p),
                r.num(s, "end", p),
                r.text(s, "transcript", p),
                media,
                tuple(idx),
            )
        )

    annotations = []
    for i, a in enumerate(r.get(data, "annotations", "")):
        p = f"annotations[{i}]"
        kps = r.get(a, "embedding_keypoints", p)
        if not isinstance(kps, list):
            r.fail(f"{p}.embedding_keypoints", "expected a list of vectors")
        ann = SegmentAnnotation(
            segment_index=r.integer(a, "segment_index", p),
            visual_keypoints=r.strings(a, "visual_keypoints", p),
            audio_keypoints=r.strings(a, "audio_keypoints", p),
            keywords=r.strings(a, "keywords", p),
            description=r.text(a, "description", p),
            embedding_desc=r.vector(r.get(a, "embedding_desc", p), f"{p}.embedding_desc", dim),
            embedding_keypoints=tuple(
                r.vector(v, f"{p}.embedding_keypoints[{j}]", dim) for j, v in enumerate(kps)
            ),
        )
        if len(ann.embedding_keypoints) != len(ann.keypoints):
            r.fail(f"{p}.embedding_keypoints", "must hold one vector per keypoint")
        annotations.append(ann)

    if len(annotations) != len(segments):
        r.fail("annotations", f"{len(annotations)} entries for {len(segments)} mid segments")

    return HierarchicalMemory(
        video_id=r.text(data, "video_id", ""),
        duration=duration,
        fine_clips=tuple(clips),
        mid_segments=tuple(segments),
        annotations=tuple(annotations),
        global_description=r.text(data, "global_description", ""),
        embedding_dim=dim,
        build_config=cfg,
    )


def store_memory(memory: HierarchicalMemory, directory: str | Path) -> Path:
    """Write the manifest into ``directory`` and return its path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    target = directory / MANIFEST_NAME
    payload = json.dumps(memory_to_dict(memory), ensure_ascii=False, indent=1)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".memory-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(payload)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return target


def load_memory(directory: str | Path) -> HierarchicalMemory:
    path = Path(directory) / MANIFEST_NAME
    if not path.is_file():
        raise ManifestError(f"missing manifest: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ManifestError(f"{path}: not valid JSON ({exc})") from exc
    return memory_from_dict(data, str(path))
