from .dataset import (
    HOP_COUNTS,
    REASONING_TYPES,
    PredictionRecord,
    QuestionRecord,
    load_dataset,
    load_predictions,
    parse_question,
    write_jsonl,
)
from .evaluate import MODES, direct_answer, run_eval
from .report import BUCKETS, BreakdownReport, Cell, dataset_stats, duration_bucket, pct, score

__all__ = [
    "BUCKETS",
    "BreakdownReport",
    "Cell",
    "HOP_COUNTS",
    "MODES",
    "PredictionRecord",
    "QuestionRecord",
    "REASONING_TYPES",
    "dataset_stats",
    "direct_answer",
    "duration_bucket",
    "load_dataset",
    "load_predictions",
    "parse_question",
    "pct",
    "run_eval",
    "score",
    "write_jsonl",
]
