"""Shared helpers for the test suite: random inputs, random memories, scripted agents."""

from __future__ import annotations

import random
import re

from aopagent.backends.mock import BagOfWordsEmbedder, HashEmbedder
from aopagent.memory.types import FineClip, HierarchicalMemory, MidSegment, SegmentAnnotation, SegmentationConfig, Utterance
from aopagent.structured import fenced

WORDS = (
    "red blue green oven dough knead bake slice river boat storm crowd speech drum guitar "
    "dog cat bird tree road car train bridge light dark music voice laugh door window "
    "kitchen garden market rain snow fire smoke glass paper table chair"
).split()


def random_utterances(
    rng: random.Random, n: int, duration: float, long_prob: float = 0.05, fit: bool = False
) -> list[Utterance]:
    """Sorted, non-overlapping utterances on a 0.1 s grid within ``[0, duration]``.

    With ``fit`` the gap and length draws are scaled so that roughly ``n``
    utterances fit in ``duration``; otherwise long draws exhaust short videos early.
    """
    if n == 0 or duration <= 0:
        return []
    scale = min(1.0, duration / (n * 18.0)) if fit else 1.0
    if fit:
        long_prob *= scale
    out: list[Utterance] = []
    cursor = 0.0
    for i in range(n):
        gap = scale * rng.choice((0.0, 0.0, rng.uniform(0, 3), rng.uniform(0, 40)))
        if rng.random() < long_prob:
            length = rng.uniform(100, 400)
        else:
            length = max(0.1, scale * rng.uniform(0.5, 25))
        start = round(cursor + gap, 1)
        end = round(start + length, 1)
        if end <= start or start >= duration:
            break
        end = min(end, round(duration, 1))
        if end <= start:
            break
        out.append(Utterance(start, end, f"u{i}"))
        cursor = end
    return out


def random_phrase(rng: random.Random, lo: int = 1, hi: int = 6) -> str:
    return " ".join(rng.choice(WORDS) for _ in range(rng.randint(lo, hi)))


def random_memory(
    rng: random.Random,
    n_mid: int,
    *,
    embedder=None,
    dim: int = 32,
    max_keypoints: int = 3,
    allow_empty_keypoints: bool = True,
) -> HierarchicalMemory:
    """Random contiguous segments with random annotations and embeddings.

    Each segment gets one to three fine clips inside it; some clips straddle
    boundaries to exercise strict containment.
    """
    embedder = embedder or HashEmbedder(dim, seed=rng.randrange(1 << 30))
    bounds = [0.0]
    for _ in range(n_mid):
        bounds.append(round(bounds[-1] + rng.uniform(1, 30), 3))
    segments, clips, anns = [], [], []
    for i in range(1, n_mid + 1):
        s, e = bounds[i - 1], bounds[i]
        segments.append(MidSegment(i, s, e, random_phrase(rng, 0, 8), rng.choice((None, f"media/seg_{i:04d}.mp4"))))
        for _ in range(rng.randint(1, 3)):
            a = rng.uniform(s, e)
            b = rng.uniform(a, e) if rng.random() < 0.8 else a + rng.uniform(0.1, 40)
            if b > a:
                clips.append((a, b, random_phrase(rng, 0, 5), rng.random() < 0.2))
        lo = 0 if allow_empty_keypoints else 1
        visual = tuple(random_phrase(rng) for _ in range(rng.randint(lo, max_keypoints)))
        audio = tuple(random_phrase(rng) for _ in range(rng.randint(0, max_keypoints)))
        if not allow_empty_keypoints and not visual + audio:
            visual = (random_phrase(rng),)
        keywords = tuple(random_phrase(rng, 1, 2) for _ in range(rng.randint(1, 5)))
        desc = random_phrase(rng, 3, 10)
        vecs = embedder.embed_batch([desc, *visual, *audio])
        anns.append(
            SegmentAnnotation(
                i, visual, audio, keywords, desc,
                tuple(float(x) for x in vecs[0]),
                tuple(tuple(float(x) for x in v) for v in vecs[1:]),
            )
        )
    clips.sort()
    fine = tuple(FineClip(j, a, b, t, g) for j, (a, b, t, g) in enumerate(clips, 1))
    return HierarchicalMemory(
        video_id=f"rand-{rng.randrange(10**6)}",
        duration=bounds[-1] if n_mid else 1.0,
        fine_clips=fine,
        mid_segments=tuple(segments),
        annotations=tuple(anns),
        global_description=random_phrase(rng, 5, 20),
        embedding_dim=len(anns[0].embedding_desc) if anns else dim,
        build_config=SegmentationConfig(
            merge_threshold_s=rng.choice((20.0, 30.0)), overlap_s=rng.choice((1.0, 2.5))
        ),
    )


def bow(dim: int = 1024) -> BagOfWordsEmbedder:
    return BagOfWordsEmbedder(dim)


# -- scripted agents -----------------------------------------------------------

_ROLE = re.compile(r"^### ROLE: (\w+)", re.M)
_OBSERVED = re.compile(r"^\[Segment (\d+) \|", re.M)


def role_of(request) -> str:
    m = _ROLE.search(request.messages[0].text)
    return m.group(1).lower() if m else ""


def observed_in(request) -> list[int]:
    """Segment ids shown under the reflector's "newly observed" heading."""
    text = request.messages[0].text
    body = text.split("## Newly observed segments", 1)[1].split("## Evidence memory", 1)[0]
    return [int(x) for x in _OBSERVED.findall(body)]


def plan_reply(tool, rationale="look", future="then answer", **args):
    return fenced({"tool": tool, "args": args, "rationale": rationale, "future_plan": future})


def verdict_reply(scores, decision="continue", reflection="noted"):
    return fenced(
        {"scores": [{"segment": s, "score": v} for s, v in scores.items()], "reflection": reflection, "decision": decision}
    )


class RoleScript:
    """Chat backend dispatching on the prompt's role line to per-role reply functions.

    Each reply function receives ``(request, n)`` where ``n`` counts earlier
    calls for that role in this run.
    """

    def __init__(self, **handlers):
        self.handlers = handlers
        self.counts: dict[str, int] = {}
        self.calls: list = []

    def chat(self, request):
        role = role_of(request)
        n = self.counts.get(role, 0)
        self.counts[role] = n + 1
        self.calls.append((role, request))
        return self.handlers[role](request, n)


class AdversarialScript(RoleScript):
    """Seeded mix of valid, malformed and hostile agent replies."""

    def __init__(self, seed: int, n_segments: int, letters=("A", "B", "C", "D")):
        self.rng = random.Random(seed)
        self.n = n_segments
        self.letters = letters
        super().__init__(planner=self._planner, reflector=self._reflector, reasoner=self._reasoner)

    def _planner(self, request, n):
        r = self.rng
        kind = r.choice(("keyword", "description", "keypoint", "neighbor", "fine", "garbage", "badtool", "badanchor", "badk"))
        if kind == "garbage":
            return r.choice(("I think we should look around.", "```json\n{oops\n```", "{}", ""))
        if kind == "badtool":
            return plan_reply("teleport", query="x")
        if kind == "badanchor":
            return plan_reply("neighbor", anchor=self.n + r.randint(1, 5))
        if kind == "badk":
            return plan_reply("keyword", query="red", k=0)
        if kind in ("neighbor", "fine"):
            args = {"anchor": r.randint(1, self.n)}
            if kind == "neighbor":
                args["radius"] = r.randint(1, 3)
            return plan_reply(kind, **args)
        args = {"query": random_phrase(r, 1, 4), "k": r.randint(1, 6)}
        if kind == "keypoint":
            args["lambda"] = round(r.random(), 3)
        return plan_reply(kind, **args)

    def _reflector(self, request, n):
        r = self.rng
        seen = observed_in(request)
        kind = r.choice(("full", "full", "missing", "extra", "garbage", "range", "nodecision"))
        scores = {s: r.randint(0, 10) for s in seen}
        decision = r.choice(("continue", "continue", "answer"))
        if kind == "missing" and scores:
            scores.pop(next(iter(scores)))
        elif kind == "extra":
            scores[self.n + 7] = 3
        elif kind == "garbage":
            return "Looks fine to me."
        elif kind == "range" and scores:
            scores[next(iter(scores))] = 11
        elif kind == "nodecision":
            return fenced({"scores": [{"segment": s, "score": v} for s, v in scores.items()]})
        return verdict_reply(scores, decision)

    def _reasoner(self, request, n):
        r = self.rng
        letter = r.choice(self.letters)
        return r.choice((f"Reasoning...\nANSWER: {letter}", f"so the answer is ({letter}).", "I am not sure.", ""))
