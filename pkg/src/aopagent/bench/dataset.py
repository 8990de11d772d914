"""Benchmark records and their line-delimited JSON files."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from ..errors import DatasetError

REASONING_TYPES = ("causal", "referential", "hypothetical", "relational", "intent")
HOP_COUNTS = (2, 3, 4)


@dataclass(frozen=True)
class QuestionRecord:
    id: str
    video_id: str
    question: str
    options: tuple[tuple[str, str], ...]
    answer: str
    reasoning_type: str
    hops: int
    video_duration_s: float

    @property
    def letters(self) -> list[str]:
        return [l for l, _ in self.options]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "video_id": self.video_id,
            "question": self.question,
            "options": [{"letter": l, "text": t} for l, t in self.options],
            "answer": self.answer,
            "reasoning_type": self.reasoning_type,
            "hops": self.hops,
            "video_duration_s": self.video_duration_s,
        }


@dataclass(frozen=True)
class PredictionRecord:
    id: str
    predicted: str | None
    rounds_used: int = 0
    trace_ref: str | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "predicted": self.predicted,
            "rounds_used": self.rounds_used,
            "trace_ref": self.trace_ref,
            "error": self.error,
        }


def _options(raw, where: str) -> tuple[tuple[str, str], ...]:
    if isinstance(raw, dict):
        items = list(raw.items())
    elif isinstance(raw, list):
        items = []
        for o in raw:
            if isinstance(o, dict) and "letter" in o and "text" in o:
                items.append((o["letter"], o["text"]))
            elif isinstance(o, (list, tuple)) and len(o) == 2:
                items.append(tuple(o))
            else:
                raise DatasetError(f"{where}: field options: unrecognised option {o!r}")
    else:
        raise DatasetError(f"{where}: field options: expected a list or object")
    out = []
    for letter, text in items:
        if not isinstance(letter, str) or len(letter.strip()) != 1 or not letter.strip().isalpha():
            raise DatasetError(f"{where}: field options: bad option letter {letter!r}")
        if not isinstance(text, str):
            raise DatasetError(f"{where}: field options: option text must be a string")
        out.append((letter.strip().upper(), text))
    if len({l for l, _ in out}) != len(out):
        raise DatasetError(f"{where}: field options: duplicate option letters")
    if not out:
        raise DatasetError(f"{where}: field options: no options")
    return tuple(out)


def parse_question(obj: dict, where: str = "record") -> QuestionRecord:
    if not isinstance(obj, dict):
        raise DatasetError(f"{where}: expected a JSON object")

    def field(name: str, kind, desc: str):
        if name not in obj:
            raise DatasetError(f"{where}: field {name}: missing")
        value = obj[name]
        if isinstance(value, bool) or not isinstance(value, kind):
            raise DatasetError(f"{where}: field {name}: expected {desc}, got {value!r}")
        return value

    rid = field("id", (str, int), "a string")
    video_id = field("video_id", str, "a string")
    question = field("question", str, "a string")
    if "options" not in obj:
        raise DatasetError(f"{where}: field options: missing")
    options = _options(obj["options"], where)
    answer = field("answer", str, "a letter").strip().upper()
    if answer not in {l for l, _ in options}:
        raise DatasetError(f"{where}: field answer: {answer!r} is not among the options")
    rtype = field("reasoning_type", str, "a string").strip().lower()
    if rtype not in REASONING_TYPES:
        raise DatasetError(f"{where}: field reasoning_type: {rtype!r} not in {REASONING_TYPES}")
    hops = field("hops", int, "an integer")
    if hops not in HOP_COUNTS:
        raise DatasetError(f"{where}: field hops: {hops} not in {HOP_COUNTS}")
    duration = float(field("video_duration_s", (int, float), "a number"))
    if not math.isfinite(duration) or duration < 0:
        raise DatasetError(f"{where}: field video_duration_s: must be a non-negative number")
    return QuestionRecord(str(rid), video_id, question, options, answer, rtype, hops, duration)


def _jsonl(path: Path) -> Iterable[tuple[int, dict]]:
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc


def load_dataset(path: str | Path) -> list[QuestionRecord]:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"dataset not found: {path}")
    records: list[QuestionRecord] = []
    seen: set[str] = set()
    for lineno, obj in _jsonl(path):
        rec = parse_question(obj, f"{path}:{lineno}")
        if rec.id in seen:
            raise DatasetError(f"{path}:{lineno}: field id: duplicate id {rec.id!r}")
        seen.add(rec.id)
        records.append(rec)
    return records


def write_jsonl(path: str | Path, rows: Iterable) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            d = row.to_dict() if hasattr(row, "to_dict") else row
            fh.write(json.dumps(d, ensure_ascii=False, sort_keys=True) + "\n")
    return path


def load_predictions(path: str | Path) -> list[PredictionRecord]:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"predictions not found: {path}")
    out = []
    for lineno, obj in _jsonl(path):
        if not isinstance(obj, dict) or "id" not in obj:
            raise DatasetError(f"{path}:{lineno}: field id: missing")
        pred = obj.get("predicted")
        if pred is not None and not isinstance(pred, str):
            raise DatasetError(f"{path}:{lineno}: field predicted: expected a letter or null")
        out.append(
            PredictionRecord(
                str(obj["id"]),
                pred,
                int(obj.get("rounds_used", 0)),
                obj.get("trace_ref"),
                obj.get("error"),
            )
        )
    return out
