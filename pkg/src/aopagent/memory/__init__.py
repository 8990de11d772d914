from .builder import annotate_segment, build_memory, synthesize_global
from .segmentation import (
    assign_fine_clips,
    derive_fine_clips,
    sanitize_utterances,
    segment_utterances,
    split_window_bounds,
    tile_segments,
    uniform_segments,
)
from .storage import MANIFEST_NAME, SCHEMA_VERSION, load_memory, store_memory
from .types import FineClip, HierarchicalMemory, MidSegment, SegmentAnnotation, SegmentationConfig, Utterance

__all__ = [
    "FineClip",
    "HierarchicalMemory",
    "MANIFEST_NAME",
    "MidSegment",
    "SCHEMA_VERSION",
    "SegmentAnnotation",
    "SegmentationConfig",
    "Utterance",
    "annotate_segment",
    "assign_fine_clips",
    "build_memory",
    "derive_fine_clips",
    "load_memory",
    "sanitize_utterances",
    "segment_utterances",
    "split_window_bounds",
    "store_memory",
    "synthesize_global",
    "tile_segments",
    "uniform_segments",
]
