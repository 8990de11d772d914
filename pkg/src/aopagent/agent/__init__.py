from .loop import (
    PlanOutcome,
    TraceRecorder,
    dump_trace,
    extract_option,
    format_options,
    parse_plan,
    parse_verdict,
    plan,
    reason,
    reflect,
    replay,
    run,
)
from .state import (
    AnswerResult,
    EvidenceEntry,
    EvidenceMemory,
    LoopConfig,
    PlanRecord,
    ReflectorVerdict,
    WorkingMemory,
    update_evidence,
)

__all__ = [
    "AnswerResult",
    "EvidenceEntry",
    "EvidenceMemory",
    "LoopConfig",
    "PlanOutcome",
    "PlanRecord",
    "ReflectorVerdict",
    "TraceRecorder",
    "WorkingMemory",
    "dump_trace",
    "extract_option",
    "format_options",
    "parse_plan",
    "parse_verdict",
    "plan",
    "reason",
    "reflect",
    "replay",
    "run",
    "update_evidence",
]
