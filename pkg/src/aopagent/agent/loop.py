"""Observe-reflect-replan loop: planner, tools, reflector, reasoner."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

from ..backends.base import ChatBackend, ChatMessage, ChatRequest, EmbeddingBackend, MediaAttachment
from ..errors import AOPError, DispatchError, PreconditionError
from ..memory.types import HierarchicalMemory
from ..prompting import load_prompt, render
from ..retrieval.tools import Observation, ObservationTools, ToolCall
from ..structured import ParseError, extract_json_object
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

log = logging.getLogger(__name__)

TRACE_SCHEMA_VERSION = "1"
FALLBACK_SCORE = 5

Options = Sequence[tuple[str, str]]


class TraceRecorder:
    """Chat wrapper that logs every exchange, tagged with agent and round."""

    def __init__(self, chat: ChatBackend):
        self.inner = chat
        self.exchanges: list[dict] = []

    def chat(self, request: ChatRequest, *, agent: str = "", round_no: int = 0) -> str:
        reply = self.inner.chat(request)
        self.exchanges.append(
            {"agent": agent, "round": round_no, "request": request.to_dict(), "response": reply}
        )
        return reply


def _recorder(chat: ChatBackend | TraceRecorder) -> TraceRecorder:
    return chat if isinstance(chat, TraceRecorder) else TraceRecorder(chat)


def format_options(options: Options) -> str:
    return "\n".join(f"{letter}. {text}" for letter, text in options) or "(none)"


def _structured_call(
    rec: TraceRecorder,
    agent: str,
    round_no: int,
    prompt: str,
    temperature: float,
    parse,
    retries: int,
    max_output_tokens: int,
    media: tuple[MediaAttachment, ...] = (),
    prompts_dir=None,
):
    """Call, parse, and on failure re-ask with the parse error quoted.

    Returns ``(parsed, errors)``; ``parsed`` is None when every attempt failed.
    """
    messages = [ChatMessage("user", prompt, media)]
    errors: list[str] = []
    for attempt in range(retries + 1):
        raw = rec.chat(
            ChatRequest(tuple(messages), temperature=temperature, max_output_tokens=max_output_tokens),
            agent=agent,
            round_no=round_no,
        )
        try:
            return parse(raw), errors
        except (ParseError, PreconditionError, DispatchError) as exc:
            errors.append(str(exc))
            log.info("%s round %d: unusable reply (%s)", agent, round_no, exc)
            messages += [
                ChatMessage("assistant", raw),
                ChatMessage("user", render(load_prompt("correction", prompts_dir), error=str(exc))),
            ]
    return None, errors


# -- planner ------------------------------------------------------------------


@dataclass(frozen=True)
class PlanOutcome:
    call: ToolCall
    rationale: str
    future_plan: str
    fallback: bool = False
    errors: tuple[str, ...] = ()


def parse_plan(raw: str, n_segments: int | None = None, config: LoopConfig | None = None) -> PlanOutcome:
    config = config or LoopConfig()
    obj = extract_json_object(raw)
    tool = obj.get("tool")
    if not isinstance(tool, str):
        raise ParseError('"tool" must be a string')
    args = obj.get("args")
    if args is None:
        args = {k: v for k, v in obj.items() if k not in ("tool", "rationale", "future_plan")}
    if not isinstance(args, dict):
        raise ParseError('"args" must be an object')
    args = dict(args)
    args.setdefault("k", config.default_k)
    if "lam" not in args:
        args.setdefault("lambda", config.default_lambda)
    call = ToolCall.from_args(tool, args)
    if call.anchor is not None and n_segments is not None and not 1 <= call.anchor <= n_segments:
        raise DispatchError(f"anchor {call.anchor} outside 1..{n_segments}")
    rationale = obj.get("rationale", "")
    future = obj.get("future_plan", "")
    return PlanOutcome(call, str(rationale), str(future))


def plan(
    question: str,
    working: WorkingMemory,
    global_desc: str,
    *,
    chat: ChatBackend | TraceRecorder,
    options: Options = (),
    n_segments: int | None = None,
    round_no: int = 1,
    config: LoopConfig | None = None,
    prompts_dir: str | Path | None = None,
) -> PlanOutcome:
    """Ask the planner for this round's tool call and its forward plan.

    Appends the chosen call to ``working.past_plans``. After the retry budget
    the call falls back to a description search over the question itself.
    """
    config = config or LoopConfig()
    if len(working.past_plans) >= config.max_rounds:
        raise PreconditionError("round budget exhausted")
    prompt = render(
        load_prompt("planner", prompts_dir),
        round=round_no,
        max_rounds=config.max_rounds,
        question=question,
        options=format_options(options),
        global_description=global_desc,
        working_memory=working.render(),
        tools=load_prompt("tools", prompts_dir).strip(),
    )
    outcome, errors = _structured_call(
        _recorder(chat),
        "planner",
        round_no,
        prompt,
        config.planner_temperature,
        lambda raw: parse_plan(raw, n_segments, config),
        config.parse_retries,
        config.max_output_tokens,
        prompts_dir=prompts_dir,
    )
    if outcome is None:
        outcome = PlanOutcome(
            ToolCall("description", query=question, k=config.default_k),
            "fallback: planner output could not be parsed",
            working.future_plan,
            fallback=True,
        )
    outcome = PlanOutcome(outcome.call, outcome.rationale, outcome.future_plan, outcome.fallback, tuple(errors))
    working.past_plans.append(PlanRecord(round_no, outcome.call, outcome.rationale))
    working.future_plan = outcome.future_plan
    return outcome


# -- evidence presentation ----------------------------------------------------


def _segment_block(
    index: int,
    start: float,
    end: float,
    description: str,
    visual: Sequence[str],
    audio: Sequence[str],
    keywords: Sequence[str],
    transcript: str,
    extra: Sequence[str] = (),
    relevance: int | None = None,
) -> str:
    head = f"[Segment {index} | {start:.1f}s-{end:.1f}s]"
    if relevance is not None:
        head += f" relevance {relevance}/10"
    lines = [head, f"Description: {description}"]
    if visual:
        lines.append("Visual keypoints: " + " | ".join(visual))
    if audio:
        lines.append("Audio keypoints: " + " | ".join(audio))
    if keywords:
        lines.append("Keywords: " + ", ".join(keywords))
    if transcript:
        lines.append(f"Transcript: {transcript}")
    if extra:
        lines.append("Fine clips:")
        lines.extend(f"  {x}" for x in extra)
    return "\n".join(lines)


def format_observation(observation: Observation, memory: HierarchicalMemory) -> str:
    if not observation.segments:
        note = observation.metadata.get("error")
        return f"(no segments returned{': ' + note if note else ''})"
    blocks = []
    for s in observation.segments:
        seg, ann = memory.segment(s.segment_index), memory.annotation(s.segment_index)
        blocks.append(
            _segment_block(
                s.segment_index,
                seg.start,
                seg.end,
                ann.description,
                ann.visual_keypoints,
                ann.audio_keypoints,
                ann.keywords,
                seg.transcript,
                s.matched_evidence if s.tool == "fine" else (),
            )
        )
    return "\n\n".join(blocks)


def format_evidence(entries: Sequence[EvidenceEntry], *, with_relevance: bool = True) -> str:
    if not entries:
        return "(empty)"
    return "\n\n".join(
        _segment_block(
            e.segment_index,
            e.start,
            e.end,
            e.description,
            e.visual_keypoints,
            e.audio_keypoints,
            e.keywords,
            e.transcript,
            [m for m in e.matched_evidence if m.startswith("[")],
            e.reflector_score if with_relevance else None,
        )
        for e in entries
    )


def _media_for(indices: Sequence[int], memory: HierarchicalMemory, media_root) -> tuple[MediaAttachment, ...]:
    out = []
    for i in indices:
        seg = memory.segment(i)
        if seg.media_ref:
            path = Path(media_root) / seg.media_ref if media_root else Path(seg.media_ref)
            out.append(MediaAttachment(str(path), seg.start, seg.end))
    return tuple(out)


# -- reflector ----------------------------------------------------------------


def parse_verdict(raw: str, observed: Sequence[int]) -> ReflectorVerdict:
    obj = extract_json_object(raw)
    scores_raw = obj.get("scores", obj.get("segment_scores"))
    if isinstance(scores_raw, dict):
        pairs = list(scores_raw.items())
    elif isinstance(scores_raw, list):
        pairs = []
        for item in scores_raw:
            if isinstance(item, dict):
                pairs.append((item.get("segment", item.get("segment_index")), item.get("score")))
            elif isinstance(item, (list, tuple)) and len(item) == 2:
                pairs.append(tuple(item))
            else:
                raise ParseError(f"unrecognised score entry {item!r}")
    else:
        raise ParseError('"scores" must be a list or an object')

    wanted = list(dict.fromkeys(observed))
    got: dict[int, int] = {}
    for seg, score in pairs:
        try:
            seg = int(seg)
        except (TypeError, ValueError):
            raise ParseError(f"segment id {seg!r} is not an integer") from None
        if isinstance(score, bool) or not isinstance(score, (int, float)) or float(score) != int(score):
            raise ParseError(f"score for segment {seg} must be an integer 0-10, got {score!r}")
        if not 0 <= score <= 10:
            raise ParseError(f"score for segment {seg} outside 0-10")
        if seg not in wanted:
            continue
        if seg in got:
            raise ParseError(f"segment {seg} scored more than once")
        got[seg] = int(score)
    missing = [i for i in wanted if i not in got]
    if missing:
        raise ParseError(f"no score for observed segment(s) {missing}")

    decision = str(obj.get("decision", "")).strip().lower()
    if decision not in ("continue", "answer"):
        raise ParseError('"decision" must be "continue" or "answer"')
    reflection = obj.get("reflection", obj.get("reflection_text", ""))
    return ReflectorVerdict(tuple((i, got[i]) for i in wanted), str(reflection), decision)


def reflect(
    observation: Observation,
    evidence: EvidenceMemory,
    current_plan: PlanOutcome | PlanRecord,
    *,
    chat: ChatBackend | TraceRecorder,
    memory: HierarchicalMemory,
    question: str,
    options: Options = (),
    round_no: int = 1,
    config: LoopConfig | None = None,
    media_root: str | Path | None = None,
    prompts_dir: str | Path | None = None,
) -> ReflectorVerdict:
    """Score the new observation, explain what is missing, and decide whether to stop."""
    config = config or LoopConfig()
    observed = observation.segment_indices
    plan_text = json.dumps(
        {"call": current_plan.call.to_dict(), "rationale": current_plan.rationale}, ensure_ascii=False
    )
    prompt = render(
        load_prompt("reflector", prompts_dir),
        question=question,
        options=format_options(options),
        current_plan=plan_text,
        observation=format_observation(observation, memory),
        evidence=format_evidence(evidence.top(config.evidence_top_m_for_reasoner)),
    )
    media = _media_for(observed, memory, media_root) if config.evidence_mode == "media_attach" else ()
    verdict, _ = _structured_call(
        _recorder(chat),
        "reflector",
        round_no,
        prompt,
        config.reflector_temperature,
        lambda raw: parse_verdict(raw, observed),
        config.parse_retries,
        config.max_output_tokens,
        media,
        prompts_dir,
    )
    if verdict is None:
        verdict = ReflectorVerdict(
            tuple((i, FALLBACK_SCORE) for i in dict.fromkeys(observed)),
            "fallback: reflector output could not be parsed",
            "continue",
            fallback=True,
        )
    return verdict


# -- reasoner -----------------------------------------------------------------

_ANSWER = re.compile(r"ANSWER\s*[:：]\s*\(?\s*([A-Za-z])\s*\)?")


def extract_option(text: str, letters: Sequence[str]) -> tuple[str | None, bool]:
    """Pull the chosen option letter out of free text.

    Prefers the last ``ANSWER: <letter>``; otherwise the last standalone
    option letter. Returns ``(letter, used_fallback)``.
    """
    valid = {l.upper() for l in letters}
    for m in reversed(list(_ANSWER.finditer(text))):
        if m.group(1).upper() in valid:
            return m.group(1).upper(), False
    for m in reversed(list(re.finditer(r"(?<![A-Za-z0-9])([A-Z])(?![A-Za-z0-9])", text))):
        if m.group(1) in valid:
            return m.group(1), True
    return None, False


def reason(
    evidence: EvidenceMemory,
    working: WorkingMemory,
    global_desc: str,
    question: str,
    *,
    chat: ChatBackend | TraceRecorder,
    options: Options = (),
    memory: HierarchicalMemory | None = None,
    config: LoopConfig | None = None,
    media_root: str | Path | None = None,
    prompts_dir: str | Path | None = None,
) -> tuple[str, str | None, bool]:
    """Final answer over the top-ranked evidence, shown in temporal order.

    Returns ``(answer_text, option_letter, used_letter_fallback)``.
    """
    config = config or LoopConfig()
    top = evidence.top(config.evidence_top_m_for_reasoner)
    chrono = sorted(top, key=lambda e: (e.start, e.segment_index))
    prompt = render(
        load_prompt("reasoner", prompts_dir),
        question=question,
        options=format_options(options),
        global_description=global_desc,
        working_memory=working.render(),
        evidence=format_evidence(chrono),
    )
    media = ()
    if config.evidence_mode == "media_attach" and memory is not None:
        media = _media_for([e.segment_index for e in chrono], memory, media_root)
    request = ChatRequest(
        (ChatMessage("user", prompt, media),),
        temperature=config.reasoner_temperature,
        max_output_tokens=config.max_output_tokens,
    )
    text = _recorder(chat).chat(request, agent="reasoner", round_no=0)
    letter, fallback = extract_option(text, [l for l, _ in options])
    return text, letter, fallback


# -- full run -----------------------------------------------------------------


def dump_trace(trace: dict) -> str:
    """Canonical serialisation; identical runs give identical bytes."""
    return json.dumps(trace, ensure_ascii=False, sort_keys=True, indent=1)


class _RecordingEmbedder:
    def __init__(self, inner: EmbeddingBackend, sink: list):
        self.inner = inner
        self.sink = sink

    def embed_batch(self, texts):
        self.sink.append(list(texts))
        return self.inner.embed_batch(texts)


def run(
    question: str,
    memory: HierarchicalMemory,
    config: LoopConfig | None = None,
    *,
    chat: ChatBackend,
    embedder: EmbeddingBackend,
    options: Options = (),
    question_id: str | None = None,
    media_root: str | Path | None = None,
    prompts_dir: str | Path | None = None,
) -> AnswerResult:
    """Answer one question over one memory; never raises for backend or parse failures."""
    config = config or LoopConfig()
    options = [(str(l), str(t)) for l, t in options]
    rec = TraceRecorder(chat)
    embed_log: list = []
    tools = ObservationTools(memory, _RecordingEmbedder(embedder, embed_log))
    working = WorkingMemory()
    evidence = EvidenceMemory()
    rounds: list[dict] = []
    flags: list[dict] = []
    trace = {
        "schema_version": TRACE_SCHEMA_VERSION,
        "question_id": question_id,
        "video_id": memory.video_id,
        "question": question,
        "options": [list(o) for o in options],
        "config": asdict(config),
        "rounds": rounds,
        "flags": flags,
        "exchanges": rec.exchanges,
        "embed_requests": embed_log,
    }

    def finish(text: str, letter: str | None, error: str | None = None) -> AnswerResult:
        trace["rounds_used"] = len(working.past_plans)
        trace["working_memory"] = working.to_dict()
        trace["evidence"] = [e.to_dict() for e in evidence.ranked()]
        trace["answer"] = {"text": text, "extracted_option": letter}
        trace["error"] = error
        return AnswerResult(text, letter, len(working.past_plans), trace, error)

    try:
        for round_no in range(1, config.max_rounds + 1):
            outcome = plan(
                question,
                working,
                memory.global_description,
                chat=rec,
                options=options,
                n_segments=memory.n_mid,
                round_no=round_no,
                config=config,
                prompts_dir=prompts_dir,
            )
            record: dict = {
                "round": round_no,
                "plan": {
                    "call": outcome.call.to_dict(),
                    "rationale": outcome.rationale,
                    "future_plan": outcome.future_plan,
                    "parse_errors": list(outcome.errors),
                },
            }
            if outcome.fallback:
                flags.append({"round": round_no, "flag": "planner_fallback"})
            try:
                observation = tools.dispatch(outcome.call, evidence)
            except DispatchError as exc:
                observation = Observation(outcome.call, (), metadata={"error": str(exc)})
                last = working.past_plans[-1]
                working.past_plans[-1] = PlanRecord(last.round, last.call, last.rationale, str(exc))
                flags.append({"round": round_no, "flag": "dispatch_error"})
            record["observation"] = observation.to_dict()

            verdict = reflect(
                observation,
                evidence,
                outcome,
                chat=rec,
                memory=memory,
                question=question,
                options=options,
                round_no=round_no,
                config=config,
                media_root=media_root,
                prompts_dir=prompts_dir,
            )
            if verdict.fallback:
                flags.append({"round": round_no, "flag": "reflector_fallback"})
            record["verdict"] = verdict.to_dict()
            evidence = update_evidence(evidence, observation, verdict, round_no=round_no, memory=memory)
            working.reflections.append(verdict.reflection_text)
            record["evidence_scores"] = {str(k): v for k, v in evidence.scores().items()}
            rounds.append(record)
            if verdict.decision == "answer":
                break

        text, letter, fallback = reason(
            evidence,
            working,
            memory.global_description,
            question,
            chat=rec,
            options=options,
            memory=memory,
            config=config,
            media_root=media_root,
            prompts_dir=prompts_dir,
        )
    except AOPError as exc:
        log.warning("run aborted: %s", exc)
        flags.append({"round": len(working.past_plans), "flag": "aborted"})
        return finish("", None, f"{type(exc).__name__}: {exc}")
    if fallback:
        flags.append({"round": 0, "flag": "answer_letter_fallback"})
    if letter is None:
        flags.append({"round": 0, "flag": "no_answer_letter"})
    return finish(text, letter)


def replay(
    trace: dict,
    memory: HierarchicalMemory,
    *,
    embedder: EmbeddingBackend,
    config: LoopConfig | None = None,
    prompts_dir: str | Path | None = None,
) -> AnswerResult:
    """Re-run a recorded session, serving every chat call from the trace."""
    from ..backends.mock import ReplayChatBackend

    cfg = trace.get("config", {})
    config = config or LoopConfig(**cfg)
    return run(
        trace["question"],
        memory,
        config,
        chat=ReplayChatBackend(trace["exchanges"]),
        embedder=embedder,
        options=[tuple(o) for o in trace.get("options", [])],
        question_id=trace.get("question_id"),
        prompts_dir=prompts_dir,
    )
