import json
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aopagent.agent import LoopConfig
from aopagent.backends import BagOfWordsEmbedder, HeuristicOmniBackend
from aopagent.bench import (
    PredictionRecord,
    QuestionRecord,
    dataset_stats,
    duration_bucket,
    load_dataset,
    load_predictions,
    run_eval,
    score,
    write_jsonl,
)
from aopagent.bench.dataset import REASONING_TYPES
from aopagent.errors import DatasetError, PreconditionError, ScoringError
from aopagent.memory import store_memory
from aopagent.synthetic import planted_case

OPTS = (("A", "one"), ("B", "two"), ("C", "three"), ("D", "four"))


def make_dataset(hop_counts=(295, 138, 86), seed=0):
    rng = random.Random(seed)
    hops = [h for h, n in zip((2, 3, 4), hop_counts) for _ in range(n)]
    rng.shuffle(hops)
    return [
        QuestionRecord(
            f"q{i}", f"v{i % 37}", "?", OPTS, rng.choice("ABCD"),
            rng.choice(REASONING_TYPES), h, round(rng.uniform(30, 900), 1),
        )
        for i, h in enumerate(hops)
    ]


def predictions_with(dataset, n_correct, seed=1):
    rng = random.Random(seed)
    right = set(rng.sample(range(len(dataset)), n_correct))
    out = []
    for i, q in enumerate(dataset):
        if i in right:
            out.append(PredictionRecord(q.id, q.answer))
        else:
            wrong = [l for l in "ABCD" if l != q.answer]
            out.append(PredictionRecord(q.id, rng.choice(wrong + [None])))
    return out


def record(**over):
    base = {
        "id": "q1", "video_id": "v1", "question": "why?",
        "options": [{"letter": "A", "text": "x"}, {"letter": "B", "text": "y"}],
        "answer": "B", "reasoning_type": "causal", "hops": 2, "video_duration_s": 120.0,
    }
    base.update(over)
    return base


def write_lines(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    return path


def test_load_dataset(tmp_path):
    p = write_lines(tmp_path / "d.jsonl", [record(id=f"q{i}") for i in range(3)])
    ds = load_dataset(p)
    assert [q.id for q in ds] == ["q0", "q1", "q2"]
    assert ds[0].options == (("A", "x"), ("B", "y"))


def test_load_dataset_errors(tmp_path):
    p = write_lines(tmp_path / "d.jsonl", [record(), record(id="q2", hops=5)])
    with pytest.raises(DatasetError, match=r"d.jsonl:2: field hops"):
        load_dataset(p)
    p = write_lines(tmp_path / "d.jsonl", [record(), record()])
    with pytest.raises(DatasetError, match="duplicate id"):
        load_dataset(p)
    p = write_lines(tmp_path / "d.jsonl", [record(answer="C")])
    with pytest.raises(DatasetError, match="field answer"):
        load_dataset(p)
    p = write_lines(tmp_path / "d.jsonl", [record(reasoning_type="funny")])
    with pytest.raises(DatasetError, match="reasoning_type"):
        load_dataset(p)


def test_buckets():
    assert [duration_bucket(x) for x in (149.9, 150.0, 300.0, 300.1)] == ["short", "medium", "medium", "long"]


def test_hop_stats_519():
    ds = make_dataset()
    stats = dataset_stats(ds)
    assert stats["total"] == 519
    assert stats["hops"] == {"2": 295, "3": 138, "4": 86}
    assert stats["mean_hops"] == "2.60"
    assert dataset_stats(make_dataset((1, 0, 0)))["mean_hops"] == "2.00"
    with pytest.raises(PreconditionError):
        dataset_stats([])


def test_score_274_of_519():
    ds = make_dataset()
    report = score(ds, predictions_with(ds, 274))
    assert report.overall.correct == 274 and report.overall.accuracy == "52.79"
    assert sum(c.total for c in report.by_hops.values()) == 519
    assert [report.by_hops[h].total for h in ("2", "3", "4")] == [295, 138, 86]
    assert "52.79" in report.to_table()


def test_score_all_correct_and_errors():
    ds = make_dataset((5, 5, 5))
    report = score(ds, [PredictionRecord(q.id, q.answer) for q in ds])
    for cells in report.partitions().values():
        assert all(c.accuracy in ("100.00", "-") for c in cells.values())
    assert report.overall.accuracy == "100.00"
    with pytest.raises(ScoringError):
        score(ds, [PredictionRecord("nope", "A")])
    with pytest.raises(ScoringError):
        score(ds, [PredictionRecord("q0", "A"), PredictionRecord("q0", "B")])
    missing = score(ds, [])
    assert missing.overall.correct == 0 and len(missing.unanswered) == 15


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 120))
def test_score_partitions_and_permutation(seed, n):
    rng = random.Random(seed)
    counts = [rng.randint(0, n) for _ in range(3)]
    if sum(counts) == 0:
        counts[0] = 1
    ds = make_dataset(tuple(counts), seed)
    preds = predictions_with(ds, rng.randint(0, len(ds)), seed)
    report = score(ds, preds)
    shuffled = preds[:]
    rng.shuffle(shuffled)
    assert score(ds, shuffled).to_dict() == report.to_dict()
    for cells in report.partitions().values():
        assert sum(c.correct for c in cells.values()) == report.overall.correct
        assert sum(c.total for c in cells.values()) == len(ds)


def test_prediction_file_round_trip(tmp_path):
    preds = [PredictionRecord("a", "B", 2, "t/a.json"), PredictionRecord("b", None, 0, None, "boom")]
    write_jsonl(tmp_path / "p.jsonl", preds)
    assert load_predictions(tmp_path / "p.jsonl") == preds


@pytest.fixture(scope="module")
def planted_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("mem")
    emb = BagOfWordsEmbedder(512)
    questions = []
    for seed in range(5):
        mem, q, _ = planted_case(seed, emb)
        store_memory(mem, root / mem.video_id)
        questions.append(q)
    return root, questions, emb


def test_run_eval_planted(planted_root, tmp_path):
    root, questions, emb = planted_root
    preds = run_eval(questions, root, chat=HeuristicOmniBackend(), embedder=emb, trace_dir=tmp_path / "traces")
    assert [p.predicted for p in preds] == [q.answer for q in questions]
    assert all((tmp_path / "traces" / f"{q.id}.json").is_file() for q in questions)
    again = run_eval(questions, root, chat=HeuristicOmniBackend(), embedder=emb)
    assert [p.predicted for p in again] == [p.predicted for p in preds]


def test_run_eval_isolates_missing_memory(planted_root):
    root, questions, emb = planted_root
    broken = list(questions)
    q = broken[2]
    broken[2] = QuestionRecord(q.id, "no-such-video", q.question, q.options, q.answer, q.reasoning_type, q.hops, q.video_duration_s)
    preds = run_eval(broken, root, chat=HeuristicOmniBackend(), embedder=emb)
    assert sum(p.predicted is not None for p in preds) == 4
    assert preds[2].predicted is None and "ManifestError" in preds[2].error


def test_run_eval_worker_invariance(planted_root):
    root, questions, emb = planted_root
    one = run_eval(questions, root, workers=1, chat=HeuristicOmniBackend(), embedder=emb)
    four = run_eval(questions, root, workers=4, chat=HeuristicOmniBackend(), embedder=emb)
    assert Counter(map(repr, one)) == Counter(map(repr, four))
    assert one == four


def test_direct_mode_has_no_tool_calls(planted_root, tmp_path):
    root, questions, emb = planted_root
    preds = run_eval(questions, root, mode="direct", chat=HeuristicOmniBackend(), embedder=emb, trace_dir=tmp_path)
    for p in preds:
        trace = json.loads(open(p.trace_ref).read())
        assert trace["rounds"] == [] and [e["agent"] for e in trace["exchanges"]] == ["direct"]
        assert p.rounds_used == 0
    with pytest.raises(PreconditionError):
        run_eval(questions, root, mode="magic", chat=HeuristicOmniBackend(), embedder=emb)


def test_run_eval_respects_round_budget(planted_root):
    root, questions, emb = planted_root
    preds = run_eval(questions, root, chat=HeuristicOmniBackend(answer_threshold=11), embedder=emb, config=LoopConfig(max_rounds=2))
    assert all(p.rounds_used == 2 for p in preds)
