"""Transcript ingestion: ASR output arrives as a JSON array of utterances."""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path

from ..errors import IngestionError
from ..memory.types import Utterance

log = logging.getLogger(__name__)


def parse_transcript(entries, source: str = "<memory>") -> list[Utterance]:
    if not isinstance(entries, list):
        raise IngestionError("transcript must be a JSON array", source)
    out = []
    for i, item in enumerate(entries):
        try:
            start, end = float(item["start"]), float(item["end"])
            text = str(item.get("text", ""))
        except (KeyError, TypeError, ValueError) as exc:
            raise IngestionError(f"entry {i} is not a valid {{start, end, text}} record", source) from exc
        if not (math.isfinite(start) and math.isfinite(end)) or start < 0:
            raise IngestionError(f"entry {i} has invalid timestamps", source)
        if end <= start:
            log.warning("%s: dropping entry %d with end %.3f <= start %.3f", source, i, end, start)
            continue
        out.append(Utterance(start, end, text))
    out.sort(key=lambda u: (u.start, u.end))
    return out


class FileTranscriptProvider:
    """Reads pre-computed ASR transcripts from disk."""

    def transcribe(self, media_ref: str | Path) -> list[Utterance]:
        path = Path(media_ref)
        if path.suffix != ".json":
            path = path.with_suffix(".json")
        if not path.is_file():
            raise IngestionError("transcript not found", str(path))
        try:
            entries = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise IngestionError(f"unreadable transcript ({exc})", str(path)) from exc
        return parse_transcript(entries, str(path))
