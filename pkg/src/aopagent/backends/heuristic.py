"""Rule-based stand-in for the omni model, driven only by prompt text.

Each packaged prompt starts with a ``### ROLE: <NAME>`` line and uses
``## Heading`` sections; this backend reads those sections and answers with
simple lexical heuristics. It lets the whole pipeline (annotation, synthesis,
planning, reflection, reasoning, direct answering) run offline and
deterministically.
"""

from __future__ import annotations

import re
from collections import Counter

from ..structured import fenced
from ..text import tokenize
from .base import ChatRequest

STOPWORDS = frozenset(
    """a an and are as at be by did do does for from had has have he her his how in is it its
    of on or she that the their them they this to was were what when where which who whom whose
    why will with video segment after before during""".split()
)

_ROLE = re.compile(r"^### ROLE: (\w+)", re.MULTILINE)
_SEGMENT = re.compile(r"^\[Segment (\d+) \|.*?\](?: relevance (\d+)/10)?$", re.MULTILINE)


def content_tokens(text: str) -> list[str]:
    return [t for t in tokenize(text) if t not in STOPWORDS and len(t) > 1]


def sections(prompt: str) -> dict[str, str]:
    out: dict[str, str] = {}
    parts = re.split(r"^## (.+)$", prompt, flags=re.MULTILINE)
    for name, body in zip(parts[1::2], parts[2::2]):
        out[name.strip().lower()] = body.strip()
    return out


def segment_blocks(text: str) -> list[tuple[int, int | None, str]]:
    """``(index, relevance, block_text)`` for every rendered segment block."""
    matches = list(_SEGMENT.finditer(text))
    out = []
    for m, nxt in zip(matches, matches[1:] + [None]):
        body = text[m.start() : nxt.start() if nxt else len(text)]
        out.append((int(m.group(1)), int(m.group(2)) if m.group(2) else None, body))
    return out


def _options(text: str) -> list[tuple[str, str]]:
    return re.findall(r"^([A-Z])\. (.*)$", text, flags=re.MULTILINE)


class HeuristicOmniBackend:
    """Deterministic lexical agent covering every role prompt.

    The planner walks keyword -> description -> keypoint searches over the
    question's content words; the reflector scores segments by the fraction of
    question words they contain and stops once one segment covers at least
    ``answer_threshold`` of them; the reasoner picks the option whose words
    best match the evidence, weighted by relevance.
    """

    def __init__(self, answer_threshold: int = 7, k: int = 4):
        self.answer_threshold = answer_threshold
        self.k = k

    def chat(self, request: ChatRequest) -> str:
        # a corrective retry repeats the original prompt first, so answer that
        prompt = request.messages[0].text
        m = _ROLE.search(prompt)
        role = m.group(1).upper() if m else ""
        handler = getattr(self, f"_{role.lower()}", None)
        if handler is None:
            return "I cannot help with that."
        return handler(prompt)

    def _annotator(self, prompt: str) -> str:
        sec = sections(prompt)
        transcript = sec.get("transcript", "")
        if transcript == "(no speech)":
            transcript = ""
        sentences = [s.strip() for s in re.split(r"(?<=[.!?])\s+", transcript) if s.strip()]
        words = content_tokens(transcript)
        keywords = [w for w, _ in Counter(words).most_common(5)]
        desc = sentences[0] if sentences else f"A segment without speech ({sec.get('segment', '')})."
        return fenced(
            {
                "visual_keypoints": [f"On screen: {s}" for s in sentences[:2]] or ["The scene continues without speech."],
                "audio_keypoints": [f"Someone says: {s}" for s in sentences[:2]] or ["No speech is heard."],
                "keywords": keywords,
                "description": desc,
            }
        )

    def _synthesizer(self, prompt: str) -> str:
        lines = sections(prompt).get("descriptions", "").splitlines()
        items = [re.sub(r"^\d+\.\s*", "", l).strip() for l in lines if l.strip()]
        return " ".join(items)

    def _planner(self, prompt: str) -> str:
        sec = sections(prompt)
        query = " ".join(dict.fromkeys(content_tokens(sec.get("question", "")))) or sec.get("question", "video")
        rnd = int(re.search(r"This is round (\d+)", prompt).group(1)) if "This is round" in prompt else 1
        sequence = [
            ("keyword", {"query": query, "k": self.k}),
            ("description", {"query": query, "k": self.k}),
            ("keypoint", {"query": query, "k": self.k, "lambda": 0.5}),
        ]
        tool, args = sequence[(rnd - 1) % len(sequence)]
        return fenced(
            {
                "tool": tool,
                "args": args,
                "rationale": f"look for segments mentioning: {query}",
                "future_plan": "try a different search if nothing relevant turns up",
            }
        )

    def _reflector(self, prompt: str) -> str:
        sec = sections(prompt)
        qwords = set(content_tokens(sec.get("question", "")))
        scores = []
        best = 0
        for idx, _, body in segment_blocks(sec.get("newly observed segments", "")):
            hit = len(qwords & set(content_tokens(body)))
            score = round(10 * hit / len(qwords)) if qwords else 0
            scores.append({"segment": idx, "score": score})
            best = max(best, score)
        for _, rel, _ in segment_blocks(sec.get("evidence memory (best first)", "")):
            best = max(best, rel or 0)
        decision = "answer" if best >= self.answer_threshold else "continue"
        return fenced(
            {
                "scores": scores,
                "reflection": "found a segment covering the question" if decision == "answer"
                else "no segment covers the question yet",
                "decision": decision,
            }
        )

    def _pick(self, options: list[tuple[str, str]], scored_text: list[tuple[float, str]]) -> str | None:
        best, best_letter = 0.0, None
        for letter, text in options:
            words = set(content_tokens(text))
            total = sum(w * len(words & set(content_tokens(body))) for w, body in scored_text)
            if total > best:
                best, best_letter = total, letter
        return best_letter

    def _reasoner(self, prompt: str) -> str:
        sec = sections(prompt)
        options = _options(sec.get("options", ""))
        blocks = segment_blocks(sec.get("evidence (temporal order)", ""))
        weighted = [((rel or 0) ** 2, body) for _, rel, body in blocks]
        letter = self._pick(options, weighted) or self._pick(options, [(1.0, sec.get("video overview", ""))])
        if letter is None:
            return "The evidence does not settle the question."
        return f"The evidence best supports option {letter}.\nANSWER: {letter}"

    def _direct(self, prompt: str) -> str:
        sec = sections(prompt)
        options = _options(sec.get("options", ""))
        qwords = set(content_tokens(sec.get("question", "")))
        lines = [l for l in sec.get("transcript", "").splitlines() if l.strip()]
        weighted = [(float(len(qwords & set(content_tokens(l)))), l) for l in lines]
        letter = self._pick(options, weighted)
        if letter is None:
            return "Not enough information."
        return f"ANSWER: {letter}"

