"""
Five ways to look at a memory
=============================

The agent never sees the whole video.  It asks one of five tools for a
handful of segments.  Here we build a tiny memory by hand and compare what
each tool returns for the same question.
"""

import numpy as np

from aopagent.backends import BagOfWordsEmbedder
from aopagent.retrieval import ObservationTools, minmax
from aopagent.synthetic import SegmentSpec, memory_from_specs

emb = BagOfWordsEmbedder(512)
specs = [
    SegmentSpec("A woman chops onions in a small kitchen.", ("knife on a board",), ("sizzling pan",), ("onion", "kitchen")),
    SegmentSpec("A red kayak drifts past the old bridge.", ("red kayak", "stone bridge"), ("water lapping",), ("kayak", "river")),
    SegmentSpec("Children laugh at a street puppet show.", ("puppet in a hat",), ("children laughing",), ("puppet", "street")),
    SegmentSpec("The kayak is pulled onto the shore at dusk.", ("kayak on sand",), ("gulls",), ("shore", "dusk")),
]
memory = memory_from_specs("demo", specs, emb)
tools = ObservationTools(memory, emb)
question = "where did the red kayak end up"

# dense: cosine between the question and each segment description
for s in tools.desc_search(question, 2):
    print("desc     ", s.segment_index, round(s.score, 3))

# sparse: BM25 over the keyword lists
for s in tools.keyword_search(question, 2):
    print("keyword  ", s.segment_index, round(s.score, 3))

# keypoints mix both signals; lambda slides between them
dense, sparse, _, _ = tools.keypoint_parts(question)
print("dense parts ", np.round(minmax(dense), 3))
print("sparse parts", np.round(minmax(sparse), 3))
for lam in (0.0, 0.5, 1.0):
    print(f"lambda={lam}", [s.segment_index for s in tools.keypoint_search(question, lam, 4)])

# once segment 2 looks promising, its neighbours and its fine clips are cheap to fetch
print("neighbours of 2:", [s.segment_index for s in tools.neighbor(2, 1)])
print("clips in 4:", [(c.start, c.end, c.text) for c in tools.fine_grained(4)])
