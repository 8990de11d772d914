"""
Observe, reflect, replan
========================

A rule-based backend stands in for the Omni-LLM so the whole loop runs
offline.  We plant one answer-bearing segment among thirty distractors,
let the agent hunt for it, then score a small sweep.
"""

import json

from aopagent.agent import LoopConfig, dump_trace, run
from aopagent.backends import BagOfWordsEmbedder, HeuristicOmniBackend
from aopagent.bench import PredictionRecord, score
from aopagent.synthetic import planted_case

emb = BagOfWordsEmbedder(256)
memory, question, planted = planted_case(seed=4, embedder=emb)
print(question.question)
print(dict(question.options))
print("planted segment:", planted)

result = run(question.question, memory, LoopConfig(), chat=HeuristicOmniBackend(), embedder=emb, options=question.options)
print("answer:", result.extracted_option, "expected:", question.answer, "rounds:", result.rounds_used)

# the trace records every call; rounds show what each tool returned
for rnd in result.trace["rounds"]:
    seen = [s["segment_index"] for s in rnd["observation"]["segments"]]
    print(rnd["round"], rnd["plan"]["call"], "->", seen, rnd["verdict"]["decision"])
print("top evidence:", [e["segment_index"] for e in result.trace["evidence"][:3]])

# the trace is plain JSON and replays byte for byte
text = dump_trace(result.trace)
print(len(text), "bytes of trace;", len(json.loads(text)["exchanges"]), "model exchanges")

# a ten-question sweep, scored per hop count and reasoning type
records, preds = [], []
for seed in range(10):
    mem, q, _ = planted_case(seed, emb)
    res = run(q.question, mem, chat=HeuristicOmniBackend(), embedder=emb, options=q.options)
    records.append(q)
    preds.append(PredictionRecord(q.id, res.extracted_option, res.rounds_used))
print(score(records, preds).to_table())
