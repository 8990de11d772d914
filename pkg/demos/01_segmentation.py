"""
From a transcript to a three-level memory
=========================================

Utterance timestamps drive everything: they are merged into mid segments,
long monologues are cut into overlapping windows, and the gaps become
silent fine clips.  No model is needed for this part.
"""

import numpy as np

from aopagent.memory import (
    SegmentationConfig,
    Utterance,
    assign_fine_clips,
    derive_fine_clips,
    segment_utterances,
    tile_segments,
)

# a short cooking video with a long uninterrupted explanation in the middle
utts = [
    Utterance(0.0, 10.0, "welcome back to the kitchen"),
    Utterance(12.0, 25.0, "today we bake sourdough"),
    Utterance(28.0, 40.0, "first the starter"),
    Utterance(60.0, 190.0, "a long explanation of hydration and gluten"),
    Utterance(200.0, 204.0, "into the oven"),
]
cfg = SegmentationConfig()

raw = segment_utterances(utts, cfg)
for s in raw:
    print(f"{s.index:>2}  {s.start:7.1f} - {s.end:7.1f}  ({s.end - s.start:5.1f}s)")

# the 130 s monologue became 30 s windows that overlap by 2.5 s
lengths = np.array([s.end - s.start for s in raw])
print("longest segment:", lengths.max())

# tiling stretches the segments over the whole video, cutting at midpoints
duration = 240.0
tiled = tile_segments(raw, duration)
print([(round(s.start, 2), round(s.end, 2)) for s in tiled])

# fine clips: one per utterance piece, plus gap clips for silences over 5 s
clips = derive_fine_clips(utts, tiled, cfg, duration)
gaps = [c for c in clips if c.is_gap]
print(f"{len(clips)} fine clips, {len(gaps)} of them silent gaps")

# each clip belongs to the segment holding its midpoint
for seg in assign_fine_clips(tiled, clips):
    print(seg.index, seg.fine_clip_indices)
