"""Synthetic memories with planted evidence, for tests and demos."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .backends.base import EmbeddingBackend
from .bench.dataset import QuestionRecord
from .memory.types import FineClip, HierarchicalMemory, MidSegment, SegmentAnnotation, SegmentationConfig

PEOPLE = (
    "chef", "pilot", "farmer", "teacher", "sailor", "painter", "drummer", "nurse", "miner", "baker",
    "tailor", "judge", "jockey", "monk", "diver", "poet", "ranger", "clown", "barber", "welder",
    "archer", "potter", "violinist", "surgeon", "mechanic",
)
THINGS = (
    "umbrella", "suitcase", "lantern", "kite", "bucket", "scarf", "helmet", "basket", "ladder", "teapot",
    "banner", "compass", "trophy", "guitar", "bicycle", "parcel", "mirror", "blanket", "notebook", "saddle",
    "anchor", "candle", "feather", "shovel", "whistle",
)
COLORS = ("crimson", "azure", "emerald", "amber", "violet", "ivory", "scarlet", "teal", "olive", "magenta")
PLACES = ("harbor", "market", "station", "garden", "bridge", "library", "stadium", "forest", "plaza", "canyon")


@dataclass(frozen=True)
class SegmentSpec:
    description: str
    visual: tuple[str, ...]
    audio: tuple[str, ...]
    keywords: tuple[str, ...]
    transcript: str = ""


def memory_from_specs(
    video_id: str,
    specs: Sequence[SegmentSpec],
    embedder: EmbeddingBackend,
    *,
    segment_s: float = 30.0,
    global_description: str | None = None,
) -> HierarchicalMemory:
    """Lay segments end to end, one fine clip each, and embed their annotations."""
    segments, clips, anns = [], [], []
    for i, spec in enumerate(specs, 1):
        start, end = (i - 1) * segment_s, i * segment_s
        clips.append(FineClip(i, start, end, spec.transcript or spec.description))
        segments.append(MidSegment(i, start, end, spec.transcript, None, (i,)))
        vectors = embedder.embed_batch([spec.description, *spec.visual, *spec.audio])
        anns.append(
            SegmentAnnotation(
                i,
                tuple(spec.visual),
                tuple(spec.audio),
                tuple(spec.keywords),
                spec.description,
                tuple(float(x) for x in vectors[0]),
                tuple(tuple(float(x) for x in v) for v in vectors[1:]),
            )
        )
    dim = len(anns[0].embedding_desc) if anns else 1
    return HierarchicalMemory(
        video_id=video_id,
        duration=len(specs) * segment_s,
        fine_clips=tuple(clips),
        mid_segments=tuple(segments),
        annotations=tuple(anns),
        global_description=global_description or "A long video showing many people and objects in different places.",
        embedding_dim=dim,
        build_config=SegmentationConfig(),
    )


def _filler(rng: random.Random, people: Sequence[str], things: Sequence[str]) -> SegmentSpec:
    person, thing = rng.choice(people), rng.choice(things)
    color, place = rng.choice(COLORS), rng.choice(PLACES)
    return SegmentSpec(
        description=f"A {person} walks past a {color} {thing} near the {place}.",
        visual=(f"A {person} walks near the {place}", f"A {color} {thing} stands still"),
        audio=(f"Street noise from the {place}",),
        keywords=(person, thing, place),
        transcript=f"Here we are at the {place}.",
    )


def planted_case(
    seed: int,
    embedder: EmbeddingBackend,
    n_segments: int = 30,
    n_options: int = 4,
) -> tuple[HierarchicalMemory, QuestionRecord, int]:
    """A memory where exactly one segment answers the question.

    Returns ``(memory, question, planted_index)``. One extra near-miss segment
    mentions the same person with a wrong colour and a different object.
    """
    rng = random.Random(seed)
    person, thing = rng.choice(PEOPLE), rng.choice(THINGS)
    colors = rng.sample(COLORS, n_options)
    answer_color = colors[0]
    place = rng.choice(PLACES)
    people = [p for p in PEOPLE if p != person]
    things = [t for t in THINGS if t != thing]

    specs = [_filler(rng, people, things) for _ in range(n_segments)]
    planted = rng.randrange(n_segments)
    specs[planted] = SegmentSpec(
        description=f"The {person} carried a {answer_color} {thing} across the {place}.",
        visual=(f"A {person} holds a {answer_color} {thing}", f"The {place} is crowded"),
        audio=(f"The {person} says the {thing} is heavy",),
        keywords=(person, thing, answer_color, place),
        transcript=f"I carried this {thing} all the way here.",
    )
    near = (planted + n_segments // 2) % n_segments
    specs[near] = SegmentSpec(
        description=f"The {person} wears a {colors[1]} hat at the {rng.choice(PLACES)}.",
        visual=(f"A {person} in a {colors[1]} hat",),
        audio=("Birds sing in the background",),
        keywords=(person, "hat"),
    )
    memory = memory_from_specs(f"planted-{seed}", specs, embedder)

    order = colors[:]
    rng.shuffle(order)
    letters = "ABCDEFGH"[:n_options]
    options = tuple((letters[i], c) for i, c in enumerate(order))
    answer = letters[order.index(answer_color)]
    question = QuestionRecord(
        id=f"q{seed}",
        video_id=memory.video_id,
        question=f"What color was the {thing} that the {person} carried?",
        options=options,
        answer=answer,
        reasoning_type="referential",
        hops=2,
        video_duration_s=memory.duration,
    )
    return memory, question, planted + 1
