"""ASR-driven segmentation into mid segments and fine clips.

Mid segments come from a three-phase procedure: utterances are merged while
the merged span stays within the merge threshold, then anything still longer
than the maximum duration is cut into fixed overlapping windows. Fine clips are
the utterances themselves plus synthetic clips for long stretches without
speech, so that visual-only content stays reachable.
"""

from __future__ import annotations

import bisect
import logging
from dataclasses import replace
from typing import Iterable, Sequence

from ..errors import ConfigError, PreconditionError
from .types import FineClip, MidSegment, SegmentationConfig, Utterance

log = logging.getLogger(__name__)


def sanitize_utterances(
    utterances: Iterable[Utterance], duration: float | None = None
) -> list[Utterance]:
    """Sort, drop empty intervals, and clip overlaps to the predecessor's end.

    When ``duration`` is given, intervals are also clipped to ``[0, duration]``.
    """
    ordered = sorted(utterances, key=lambda u: (u.start, u.end))
    out: list[Utterance] = []
    for u in ordered:
        start, end = max(0.0, float(u.start)), float(u.end)
        if duration is not None:
            end = min(end, duration)
        if out and start < out[-1].end:
            start = out[-1].end
        if end <= start:
            log.warning("dropping empty or fully-overlapped utterance (%s, %s)", u.start, u.end)
            continue
        if start != u.start or end != u.end:
            u = replace(u, start=start, end=end)
        out.append(u)
    return out


def split_window_bounds(start: float, end: float, window: float, stride: float) -> list[tuple[float, float]]:
    """Fixed windows of length ``window`` every ``stride`` seconds over ``[start, end]``.

    The last window is clipped to ``end`` and never dropped.
    """
    if stride <= 0:
        raise ConfigError("window stride must be positive")
    bounds = []
    k = 0
    while True:
        ws = start + k * stride
        we = ws + window
        if we >= end:
            bounds.append((ws, end))
            return bounds
        bounds.append((ws, we))
        k += 1


def _merge_phase(utterances: Sequence[Utterance], gmax: float) -> list[tuple[float, float, list[str]]]:
    merged: list[tuple[float, float, list[str]]] = []
    cur: tuple[float, float, list[str]] | None = None
    for t in utterances:
        if cur is not None and (t.end - cur[0]) <= gmax:
            cur = (cur[0], max(cur[1], t.end), cur[2] + [t.text])
        else:
            if cur is not None:
                merged.append(cur)
            cur = (t.start, t.end, [t.text])
    if cur is not None:
        merged.append(cur)
    return merged


def segment_utterances(
    utterances: Sequence[Utterance], config: SegmentationConfig | None = None
) -> list[MidSegment]:
    """Merge utterances into mid segments and split over-long ones.

    Returns an empty list for empty input; callers fall back to
    :func:`uniform_segments`.
    """
    config = config or SegmentationConfig()
    config.validate()
    utterances = sanitize_utterances(utterances)
    gmax = config.merge_threshold_s
    spans: list[tuple[float, float, str]] = []
    for start, end, texts in _merge_phase(utterances, gmax):
        text = " ".join(t for t in texts if t)
        if end - start > config.max_duration_s:
            for ws, we in split_window_bounds(start, end, gmax, config.split_stride_s):
                spans.append((ws, we, text))
        else:
            spans.append((start, end, text))
    spans.sort(key=lambda s: (s[0], s[1]))
    return [MidSegment(index=i, start=s, end=e, transcript=t) for i, (s, e, t) in enumerate(spans, 1)]


def uniform_segments(duration: float, config: SegmentationConfig | None = None) -> list[MidSegment]:
    """Fallback for videos without speech: overlapping fixed windows over the whole video."""
    config = config or SegmentationConfig()
    if duration <= 0:
        raise PreconditionError("duration must be positive")
    stride = config.no_speech_window_s - config.overlap_s
    bounds = split_window_bounds(0.0, duration, config.no_speech_window_s, stride)
    return [MidSegment(index=i, start=s, end=e) for i, (s, e) in enumerate(bounds, 1)]


def cut_points(segments: Sequence[MidSegment]) -> list[float]:
    """Ownership boundaries between consecutive segments.

    Midpoint of the gap (or of the overlap) between each neighbouring pair.
    Segment ``i`` owns ``[cuts[i-2], cuts[i-1]]``.
    """
    return [(a.end + b.start) / 2.0 for a, b in zip(segments, segments[1:])]


def tile_segments(segments: Sequence[MidSegment], duration: float) -> list[MidSegment]:
    """Stretch segment boundaries over uncovered gaps so the union covers ``[0, duration]``."""
    if not segments:
        return []
    cuts = cut_points(segments)
    tiled = []
    n = len(segments)
    for i, seg in enumerate(segments):
        start = 0.0 if i == 0 else min(seg.start, cuts[i - 1])
        end = max(duration, seg.end) if i == n - 1 else max(seg.end, cuts[i])
        tiled.append(replace(seg, start=start, end=end))
    return tiled


def _cut(start: float, end: float, cuts: Sequence[float]) -> list[tuple[float, float]]:
    lo = bisect.bisect_right(cuts, start)
    hi = bisect.bisect_left(cuts, end)
    edges = [start, *cuts[lo:hi], end]
    return [(a, b) for a, b in zip(edges, edges[1:]) if b > a]


def uncovered_spans(utterances: Sequence[Utterance], duration: float) -> list[tuple[float, float]]:
    spans = []
    cursor = 0.0
    for u in utterances:
        if u.start > cursor:
            spans.append((cursor, u.start))
        cursor = max(cursor, u.end)
    if duration > cursor:
        spans.append((cursor, duration))
    return spans


def derive_fine_clips(
    utterances: Sequence[Utterance],
    mid_segments: Sequence[MidSegment],
    config: SegmentationConfig | None = None,
    duration: float | None = None,
) -> list[FineClip]:
    """One clip per utterance plus synthetic clips for silent spans.

    Silent spans longer than ``gap_fill_threshold_s`` become gap clips. Every
    clip is cut at segment ownership boundaries, so each one lies inside
    exactly one tiled mid segment; in practice only utterances that were
    window-split and gaps between segments get cut.
    """
    config = config or SegmentationConfig()
    utterances = sanitize_utterances(utterances, duration)
    if duration is None:
        ends = [u.end for u in utterances] + [s.end for s in mid_segments]
        duration = max(ends, default=0.0)
    cuts = cut_points(mid_segments)

    pieces: list[tuple[float, float, str, bool]] = []
    for u in utterances:
        for a, b in _cut(u.start, u.end, cuts):
            pieces.append((a, b, u.text, False))
    for gs, ge in uncovered_spans(utterances, duration):
        if ge - gs > config.gap_fill_threshold_s:
            for a, b in _cut(gs, ge, cuts):
                pieces.append((a, b, "", True))
    pieces.sort(key=lambda p: (p[0], p[1]))
    return [FineClip(index=i, start=a, end=b, text=t, is_gap=g) for i, (a, b, t, g) in enumerate(pieces, 1)]


def owner_of(time_s: float, segments: Sequence[MidSegment]) -> int:
    """1-based index of the segment owning ``time_s`` under midpoint tiling."""
    return bisect.bisect_right(cut_points(segments), time_s) + 1


def assign_fine_clips(segments: Sequence[MidSegment], clips: Sequence[FineClip]) -> list[MidSegment]:
    """Attach each clip to the segment whose ownership cell contains its midpoint."""
    if not segments:
        return []
    cuts = cut_points(segments)
    owned: list[list[int]] = [[] for _ in segments]
    for clip in clips:
        owned[bisect.bisect_right(cuts, clip.midpoint)].append(clip.index)
    return [replace(seg, fine_clip_indices=tuple(idx)) for seg, idx in zip(segments, owned)]
