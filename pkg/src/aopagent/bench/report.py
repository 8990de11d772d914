"""Accuracy breakdowns and dataset statistics."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Sequence

from ..errors import PreconditionError, ScoringError
from .dataset import HOP_COUNTS, REASONING_TYPES, PredictionRecord, QuestionRecord

SHORT_MAX_S = 150.0
LONG_MIN_S = 300.0
BUCKETS = ("short", "medium", "long")


def duration_bucket(seconds: float) -> str:
    """short < 150 s <= medium <= 300 s < long."""
    if seconds < SHORT_MAX_S:
        return "short"
    if seconds <= LONG_MIN_S:
        return "medium"
    return "long"


def pct(correct: int, total: int) -> str:
    """Percentage with two decimals, rounded half-up: ``pct(274, 519) == "52.79"``."""
    if total == 0:
        return "-"
    value = Decimal(100 * correct) / Decimal(total)
    return str(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def mean2(values: Iterable[float]) -> str:
    values = list(values)
    if not values:
        raise PreconditionError("mean of an empty collection")
    value = Decimal(repr(sum(values))) / Decimal(len(values))
    return str(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass
class Cell:
    correct: int = 0
    total: int = 0

    @property
    def accuracy(self) -> str:
        return pct(self.correct, self.total)

    def to_dict(self) -> dict:
        acc = self.accuracy
        return {"correct": self.correct, "total": self.total, "accuracy": None if acc == "-" else float(acc)}


@dataclass
class BreakdownReport:
    overall: Cell
    by_type: dict[str, Cell] = field(default_factory=dict)
    by_bucket: dict[str, Cell] = field(default_factory=dict)
    by_hops: dict[str, Cell] = field(default_factory=dict)
    unanswered: list[str] = field(default_factory=list)

    def partitions(self) -> dict[str, dict[str, Cell]]:
        return {"reasoning_type": self.by_type, "duration": self.by_bucket, "hops": self.by_hops}

    def to_dict(self) -> dict:
        return {
            "overall": self.overall.to_dict(),
            **{name: {k: c.to_dict() for k, c in cells.items()} for name, cells in self.partitions().items()},
            "unanswered": list(self.unanswered),
        }

    def to_table(self) -> str:
        columns = [("Overall", self.overall)]
        columns += [(k.capitalize(), c) for k, c in self.by_type.items()]
        columns += [(k.capitalize(), c) for k, c in self.by_bucket.items()]
        columns += [(f"{k}hop", c) for k, c in self.by_hops.items()]
        widths = [max(len(name), 7) for name, _ in columns]
        head = " | ".join(name.rjust(w) for (name, _), w in zip(columns, widths))
        acc = " | ".join(c.accuracy.rjust(w) for (_, c), w in zip(columns, widths))
        counts = " | ".join(f"{c.correct}/{c.total}".rjust(w) for (_, c), w in zip(columns, widths))
        rule = "-+-".join("-" * w for w in widths)
        return "\n".join([head, rule, acc, counts])


def score(dataset: Sequence[QuestionRecord], predictions: Iterable[PredictionRecord]) -> BreakdownReport:
    """Single-axis accuracy partitions; missing or empty predictions count as wrong."""
    by_id = {q.id: q for q in dataset}
    predicted: dict[str, str | None] = {}
    for p in predictions:
        if p.id not in by_id:
            raise ScoringError(f"prediction for unknown id {p.id!r}")
        if p.id in predicted:
            raise ScoringError(f"duplicate prediction for id {p.id!r}")
        predicted[p.id] = p.predicted

    report = BreakdownReport(
        Cell(),
        {t: Cell() for t in REASONING_TYPES},
        {b: Cell() for b in BUCKETS},
        {str(h): Cell() for h in HOP_COUNTS},
    )
    for q in dataset:
        guess = predicted.get(q.id)
        if guess is None:
            report.unanswered.append(q.id)
        ok = int(guess is not None and guess.strip().upper() == q.answer)
        for cell in (
            report.overall,
            report.by_type[q.reasoning_type],
            report.by_bucket[duration_bucket(q.video_duration_s)],
            report.by_hops[str(q.hops)],
        ):
            cell.correct += ok
            cell.total += 1
    report.unanswered.sort()
    return report


def dataset_stats(dataset: Sequence[QuestionRecord]) -> dict:
    if not dataset:
        raise PreconditionError("dataset is empty")
    types = Counter(q.reasoning_type for q in dataset)
    hops = Counter(q.hops for q in dataset)
    buckets = Counter(duration_bucket(q.video_duration_s) for q in dataset)
    return {
        "total": len(dataset),
        "videos": len({q.video_id for q in dataset}),
        "reasoning_type": {t: types.get(t, 0) for t in REASONING_TYPES},
        "hops": {str(h): hops.get(h, 0) for h in HOP_COUNTS},
        "duration": {b: buckets.get(b, 0) for b in BUCKETS},
        "mean_hops": mean2(q.hops for q in dataset),
        "mean_duration_s": mean2(q.video_duration_s for q in dataset),
    }
