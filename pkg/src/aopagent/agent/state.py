"""Loop state: working memory, evidence memory, verdicts and results."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import ConfigError
from ..memory.types import HierarchicalMemory
from ..retrieval.tools import Observation, ToolCall

EVIDENCE_MODES = ("text_only", "media_attach")


@dataclass(frozen=True)
class LoopConfig:
    max_rounds: int = 3
    evidence_top_m_for_reasoner: int = 8
    planner_temperature: float = 0.2
    reflector_temperature: float = 0.2
    reasoner_temperature: float = 0.2
    evidence_mode: str = "text_only"
    parse_retries: int = 1
    default_k: int = 4
    default_lambda: float = 0.5
    max_output_tokens: int = 2048

    def __post_init__(self) -> None:
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")
        if self.evidence_top_m_for_reasoner < 1:
            raise ConfigError("evidence_top_m_for_reasoner must be >= 1")
        if self.evidence_mode not in EVIDENCE_MODES:
            raise ConfigError(f"evidence_mode must be one of {EVIDENCE_MODES}")
        if self.parse_retries < 0:
            raise ConfigError("parse_retries must be >= 0")
        if self.default_k < 1:
            raise ConfigError("default_k must be >= 1")
        if not 0.0 <= self.default_lambda <= 1.0:
            raise ConfigError("default_lambda must be in [0, 1]")
        for name in ("planner_temperature", "reflector_temperature", "reasoner_temperature"):
            if not 0.0 <= getattr(self, name) <= 2.0:
                raise ConfigError(f"{name} must be in [0, 2]")


@dataclass(frozen=True)
class PlanRecord:
    round: int
    call: ToolCall
    rationale: str
    note: str = ""


@dataclass
class WorkingMemory:
    """Plans issued so far, the current forward plan, and reflector feedback."""

    past_plans: list[PlanRecord] = field(default_factory=list)
    future_plan: str = ""
    reflections: list[str] = field(default_factory=list)

    def render(self) -> str:
        if not self.past_plans:
            return "(empty: no observations yet)"
        lines = []
        for i, p in enumerate(self.past_plans):
            lines.append(f"Round {p.round} call: {json.dumps(p.call.to_dict(), ensure_ascii=False)}")
            lines.append(f"Round {p.round} rationale: {p.rationale}")
            if p.note:
                lines.append(f"Round {p.round} tool error: {p.note}")
            if i < len(self.reflections):
                lines.append(f"Round {p.round} reflection: {self.reflections[i]}")
        if self.future_plan:
            lines.append(f"Future plan: {self.future_plan}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "past_plans": [
                {"round": p.round, "call": p.call.to_dict(), "rationale": p.rationale, "note": p.note}
                for p in self.past_plans
            ],
            "future_plan": self.future_plan,
            "reflections": list(self.reflections),
        }


@dataclass(frozen=True)
class EvidenceEntry:
    segment_index: int
    reflector_score: int
    tool_score: float
    first_round: int
    matched_evidence: tuple[str, ...] = ()
    start: float = 0.0
    end: float = 0.0
    description: str = ""
    visual_keypoints: tuple[str, ...] = ()
    audio_keypoints: tuple[str, ...] = ()
    keywords: tuple[str, ...] = ()
    transcript: str = ""
    media_ref: str | None = None

    def rank_key(self) -> tuple:
        return (-self.reflector_score, -self.tool_score, self.segment_index)

    def to_dict(self) -> dict:
        return {
            "segment_index": self.segment_index,
            "reflector_score": self.reflector_score,
            "tool_score": self.tool_score,
            "first_round": self.first_round,
            "matched_evidence": list(self.matched_evidence),
        }


@dataclass
class EvidenceMemory:
    """Every observed segment, keyed by index and ranked by reflector score."""

    entries: dict[int, EvidenceEntry] = field(default_factory=dict)

    def __contains__(self, index: object) -> bool:
        return index in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def ranked(self) -> list[EvidenceEntry]:
        return sorted(self.entries.values(), key=EvidenceEntry.rank_key)

    def top(self, m: int) -> list[EvidenceEntry]:
        return self.ranked()[:m]

    def scores(self) -> dict[int, int]:
        return {i: e.reflector_score for i, e in sorted(self.entries.items())}

    def copy(self) -> "EvidenceMemory":
        return EvidenceMemory(dict(self.entries))


@dataclass(frozen=True)
class ReflectorVerdict:
    segment_scores: tuple[tuple[int, int], ...]
    reflection_text: str
    decision: str
    fallback: bool = False

    def score_of(self, index: int) -> int | None:
        for i, s in self.segment_scores:
            if i == index:
                return s
        return None

    def to_dict(self) -> dict:
        return {
            "segment_scores": [list(p) for p in self.segment_scores],
            "reflection": self.reflection_text,
            "decision": self.decision,
            "fallback": self.fallback,
        }


def update_evidence(
    evidence: EvidenceMemory,
    observation: Observation,
    verdict: ReflectorVerdict,
    *,
    round_no: int = 0,
    memory: HierarchicalMemory | None = None,
) -> EvidenceMemory:
    """Merge one round's observation into a copy of ``evidence``.

    Entries are never removed; repeated observations keep the best reflector
    and tool scores and accumulate matched evidence.
    """
    out = evidence.copy()
    for seg in observation.segments:
        idx = seg.segment_index
        score = verdict.score_of(idx)
        score = 0 if score is None else score
        old = out.entries.get(idx)
        if old is None:
            snap: dict = {}
            if memory is not None and 1 <= idx <= memory.n_mid:
                ann, ms = memory.annotation(idx), memory.segment(idx)
                snap = dict(
                    start=ms.start,
                    end=ms.end,
                    description=ann.description,
                    visual_keypoints=ann.visual_keypoints,
                    audio_keypoints=ann.audio_keypoints,
                    keywords=ann.keywords,
                    transcript=ms.transcript,
                    media_ref=ms.media_ref,
                )
            out.entries[idx] = EvidenceEntry(idx, score, seg.score, round_no, seg.matched_evidence, **snap)
        else:
            matched = tuple(dict.fromkeys(old.matched_evidence + seg.matched_evidence))
            out.entries[idx] = EvidenceEntry(
                idx,
                max(old.reflector_score, score),
                max(old.tool_score, seg.score),
                old.first_round,
                matched,
                old.start,
                old.end,
                old.description,
                old.visual_keypoints,
                old.audio_keypoints,
                old.keywords,
                old.transcript,
                old.media_ref,
            )
    return out


@dataclass
class AnswerResult:
    answer_text: str
    extracted_option: str | None
    rounds_used: int
    trace: dict
    error: str | None = None

    @property
    def answered(self) -> bool:
        return self.extracted_option is not None
