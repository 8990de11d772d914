import json
import re

import numpy as np
import pytest

from aopagent.backends import Backends, BagOfWordsEmbedder, ScriptedChatBackend, SequenceChatBackend
from aopagent.backends.base import BUILD_TEMPERATURE
from aopagent.errors import AnnotationError, MemoryBuildError, PreconditionError, TransportError
from aopagent.memory import MidSegment, Utterance, annotate_segment, build_memory, synthesize_global
from aopagent.structured import fenced

FIELDS = {
    "visual_keypoints": ["The galaxy image shows swirling arms of stars"],
    "audio_keypoints": ["A low, sustained electronic tone plays"],
    "keywords": ["galaxy", "spiral arms"],
    "description": "A slow zoom into a spiral galaxy with ambient music.",
}


def annotator(fields=FIELDS):
    return ScriptedChatBackend([("ROLE: ANNOTATOR", fenced(fields))], default=lambda r: "summary")


def test_annotation_echoes_script():
    emb = BagOfWordsEmbedder(256)
    chat = annotator()
    ann = annotate_segment(MidSegment(3, 0, 20, "we look at a galaxy"), chat, emb)
    assert ann.segment_index == 3
    assert list(ann.visual_keypoints) == FIELDS["visual_keypoints"]
    assert list(ann.audio_keypoints) == FIELDS["audio_keypoints"]
    assert list(ann.keywords) == FIELDS["keywords"]
    assert ann.description == FIELDS["description"]
    assert len(ann.embedding_keypoints) == 2
    for v in (ann.embedding_desc, *ann.embedding_keypoints):
        assert abs(np.linalg.norm(v) - 1.0) < 1e-6
    assert np.allclose(ann.embedding_desc, emb.embed_one(FIELDS["description"]))
    assert chat.calls[0].temperature == BUILD_TEMPERATURE == 1.0
    assert "we look at a galaxy" in chat.calls[0].text


def test_missing_description_retries_then_fails():
    broken = {k: v for k, v in FIELDS.items() if k != "description"}
    chat = SequenceChatBackend([fenced(broken), fenced(broken)])
    with pytest.raises(AnnotationError) as info:
        annotate_segment(MidSegment(2, 0, 5), chat, BagOfWordsEmbedder(64))
    assert info.value.segment_index == 2
    assert "keypoints" in info.value.raw_text
    assert len(chat.calls) == 2
    # the retry quotes the parse error back to the model
    assert "description" in chat.calls[1].messages[-1].text


def test_retry_recovers():
    chat = SequenceChatBackend(["no json here", fenced(FIELDS)])
    ann = annotate_segment(MidSegment(1, 0, 5), chat, BagOfWordsEmbedder(64))
    assert ann.description == FIELDS["description"]


def test_backend_failure_carries_segment_index():
    class Down:
        def chat(self, request):
            raise TransportError("down")

    with pytest.raises(TransportError) as info:
        annotate_segment(MidSegment(4, 0, 5), Down(), BagOfWordsEmbedder(64))
    assert info.value.segment_index == 4


def test_media_attachment_passed():
    chat = annotator()
    annotate_segment(MidSegment(1, 5, 9, "", "media/seg_0001.mp4"), chat, BagOfWordsEmbedder(64), media_root="/m")
    (att,) = chat.calls[0].messages[0].media
    assert att.path == "/m/media/seg_0001.mp4" and (att.start_s, att.end_s) == (5, 9)


def concatenator(request):
    lines = re.findall(r"^\d+\. (.*)$", request.text, flags=re.M)
    return " ".join(lines)


def test_synthesize_single_and_concat():
    chat = ScriptedChatBackend([], default=concatenator)
    assert synthesize_global(["only one"], chat) == "only one"
    assert synthesize_global(["a b", "c", "d e"], chat) == "a b c d e"
    with pytest.raises(PreconditionError):
        synthesize_global([], chat)


def test_synthesize_chunks_over_budget():
    chat = ScriptedChatBackend([], default=concatenator)
    descs = [f"description number {i} " + "x" * 200 for i in range(20)]
    out = synthesize_global(descs, chat, context_budget_tokens=1000)
    chunk_calls = [c for c in chat.calls if "one part of a longer video" in c.text]
    final_calls = [c for c in chat.calls if "whole video" in c.text]
    assert len(chunk_calls) >= 2 and len(final_calls) == 1
    assert out == " ".join(descs)


def scripted_backends():
    def reply(request):
        seg = re.search(r"Segment (\d+)", request.text).group(1)
        return fenced({**FIELDS, "description": f"segment {seg} description"})

    chat = ScriptedChatBackend([("ROLE: ANNOTATOR", reply)], default=concatenator)
    return Backends(chat, BagOfWordsEmbedder(128))


def test_build_three_utterances():
    utts = [Utterance(0, 10, "a"), Utterance(12, 25, "b"), Utterance(28, 40, "c")]
    mem = build_memory("v", 40, utts, scripted_backends())
    assert (mem.n_mid, mem.n_fine) == (2, 3)
    assert [(s.start, s.end) for s in mem.mid_segments] == [(0, 26.5), (26.5, 40)]
    assert [s.fine_clip_indices for s in mem.mid_segments] == [(1, 2), (3,)]
    assert mem.global_description == "segment 1 description segment 2 description"
    assert mem.embedding_dim == 128


def test_build_without_speech_uses_uniform_windows():
    mem = build_memory("v", 65, [], scripted_backends())
    assert [(s.start, s.end) for s in mem.mid_segments] == [(0, 30), (27.5, 57.5), (55, 65)]
    assert all(c.is_gap for c in mem.fine_clips)


def test_build_parallel_matches_serial():
    utts = [Utterance(i * 7.0, i * 7.0 + 5, f"w{i}") for i in range(30)]
    a = build_memory("v", 215, utts, scripted_backends(), workers=1)
    b = build_memory("v", 215, utts, scripted_backends(), workers=4)
    assert a == b


def test_build_zero_duration():
    with pytest.raises(PreconditionError):
        build_memory("v", 0, [], scripted_backends())


def test_build_reports_partial_progress():
    calls = {"n": 0}

    def reply(request):
        calls["n"] += 1
        if calls["n"] == 3:
            return "garbage"
        if calls["n"] == 4:
            return "still garbage"
        return fenced(FIELDS)

    chat = ScriptedChatBackend([("ROLE: ANNOTATOR", reply)], default="x")
    utts = [Utterance(i * 40.0, i * 40.0 + 5, "w") for i in range(4)]
    with pytest.raises(MemoryBuildError) as info:
        build_memory("v", 160, utts, Backends(chat, BagOfWordsEmbedder(32)))
    assert info.value.stage == "annotate"
    assert len(info.value.annotated) == 2
    assert isinstance(info.value.cause, AnnotationError)


def test_media_ref_format():
    utts = [Utterance(0, 10, "a"), Utterance(40, 50, "b")]
    mem = build_memory("v", 50, utts, scripted_backends(), media_refs="media/seg_{index:04d}.mp4")
    assert [s.media_ref for s in mem.mid_segments] == ["media/seg_0001.mp4", "media/seg_0002.mp4"]


def test_fenced_helper_is_valid_json():
    body = fenced(FIELDS).split("\n", 1)[1].rsplit("```", 1)[0]
    assert json.loads(body) == FIELDS
