from .bm25 import BM25Field, bm25_idf
from .tools import (
    DEFAULT_K,
    DEFAULT_LAMBDA,
    DEFAULT_RADIUS,
    MAX_RADIUS,
    TOOLS,
    Observation,
    ObservationTools,
    ScoredSegment,
    ToolCall,
    canonical_tool,
    minmax,
    top_k,
)

__all__ = [
    "BM25Field",
    "DEFAULT_K",
    "DEFAULT_LAMBDA",
    "DEFAULT_RADIUS",
    "MAX_RADIUS",
    "Observation",
    "ObservationTools",
    "ScoredSegment",
    "TOOLS",
    "ToolCall",
    "bm25_idf",
    "canonical_tool",
    "minmax",
    "top_k",
]
