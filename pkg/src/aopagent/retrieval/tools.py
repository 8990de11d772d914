"""The five observation tools over a built memory, plus call dispatch."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Container, Sequence

import numpy as np

from ..backends.base import EmbeddingBackend
from ..errors import DispatchError, PreconditionError
from ..memory.types import FineClip, HierarchicalMemory
from ..text import tokenize
from .bm25 import BM25Field

TOOLS = ("description", "keyword", "keypoint", "neighbor", "fine")
QUERY_TOOLS = ("description", "keyword", "keypoint")
ANCHOR_TOOLS = ("neighbor", "fine")

DEFAULT_K = 4
DEFAULT_LAMBDA = 0.5
DEFAULT_RADIUS = 1
MAX_RADIUS = 3

# Raw similarity sums are rounded before ranking so that summation-order
# noise never reorders exact ties.
SCORE_DECIMALS = 12

_ALIASES = {
    "desc": "description",
    "desc_search": "description",
    "description_search": "description",
    "keyword_search": "keyword",
    "keywords": "keyword",
    "keypoint_search": "keypoint",
    "keypoints": "keypoint",
    "neighbour": "neighbor",
    "neighbors": "neighbor",
    "neighbor_search": "neighbor",
    "fine_grained": "fine",
    "fine_grained_search": "fine",
}


def canonical_tool(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in TOOLS:
        raise DispatchError(f"unknown tool {name!r}; expected one of {', '.join(TOOLS)}")
    return key


@dataclass(frozen=True)
class ToolCall:
    """A validated observation request; irrelevant fields stay ``None``."""

    tool: str
    query: str | None = None
    k: int | None = None
    lam: float | None = None
    anchor: int | None = None
    radius: int | None = None

    def __post_init__(self) -> None:
        tool = canonical_tool(self.tool)
        object.__setattr__(self, "tool", tool)
        if tool in QUERY_TOOLS:
            if not isinstance(self.query, str) or not self.query.strip():
                raise PreconditionError(f"{tool} search needs a non-empty query")
            if self.k is None:
                object.__setattr__(self, "k", DEFAULT_K)
            if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 1:
                raise PreconditionError(f"k must be a positive integer, got {self.k!r}")
            if self.anchor is not None or self.radius is not None:
                raise PreconditionError(f"{tool} search takes no anchor/radius")
        if tool == "keypoint":
            if self.lam is None:
                object.__setattr__(self, "lam", DEFAULT_LAMBDA)
            if isinstance(self.lam, bool) or not isinstance(self.lam, (int, float)) or not 0.0 <= self.lam <= 1.0:
                raise PreconditionError(f"lambda must be in [0, 1], got {self.lam!r}")
            object.__setattr__(self, "lam", float(self.lam))
        elif self.lam is not None:
            raise PreconditionError(f"{tool} takes no lambda")
        if tool in ANCHOR_TOOLS:
            if isinstance(self.anchor, bool) or not isinstance(self.anchor, int) or self.anchor < 1:
                raise PreconditionError(f"{tool} needs a positive integer anchor, got {self.anchor!r}")
            if self.query is not None or self.k is not None:
                raise PreconditionError(f"{tool} takes no query/k")
        if tool == "neighbor":
            if self.radius is None:
                object.__setattr__(self, "radius", DEFAULT_RADIUS)
            if isinstance(self.radius, bool) or not isinstance(self.radius, int) or not 1 <= self.radius <= MAX_RADIUS:
                raise PreconditionError(f"radius must be an integer in 1..{MAX_RADIUS}, got {self.radius!r}")
        elif self.radius is not None:
            raise PreconditionError(f"{tool} takes no radius")

    @classmethod
    def from_args(cls, tool: str, args: dict | None) -> "ToolCall":
        """Build from loosely-typed planner arguments, ignoring keys the tool does not use."""
        tool = canonical_tool(tool)
        args = dict(args or {})
        kw: dict = {}
        if tool in QUERY_TOOLS:
            kw["query"] = args.get("query")
            if args.get("k") is not None:
                kw["k"] = _as_int(args["k"], "k")
        if tool == "keypoint":
            lam = args.get("lambda", args.get("lam"))
            if lam is not None:
                try:
                    kw["lam"] = float(lam)
                except (TypeError, ValueError):
                    raise PreconditionError(f"lambda must be a number, got {lam!r}") from None
        if tool in ANCHOR_TOOLS:
            anchor = args.get("anchor", args.get("segment", args.get("j")))
            kw["anchor"] = _as_int(anchor, "anchor")
        if tool == "neighbor" and args.get("radius", args.get("r")) is not None:
            kw["radius"] = _as_int(args.get("radius", args.get("r")), "radius")
        return cls(tool, **kw)

    def to_dict(self) -> dict:
        d: dict = {"tool": self.tool}
        for name, key in (("query", "query"), ("k", "k"), ("lam", "lambda"), ("anchor", "anchor"), ("radius", "radius")):
            value = getattr(self, name)
            if value is not None:
                d[key] = value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ToolCall":
        return cls.from_args(d["tool"], {k: v for k, v in d.items() if k != "tool"})


def _as_int(value, name: str) -> int:
    if isinstance(value, bool):
        raise PreconditionError(f"{name} must be an integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str) and value.strip().lstrip("-").isdigit():
        return int(value.strip())
    raise PreconditionError(f"{name} must be an integer, got {value!r}")


@dataclass(frozen=True)
class ScoredSegment:
    segment_index: int
    score: float
    tool: str
    matched_evidence: tuple[str, ...] = ()
    already_observed: bool = False

    def to_dict(self) -> dict:
        return {
            "segment_index": self.segment_index,
            "score": self.score,
            "tool": self.tool,
            "matched_evidence": list(self.matched_evidence),
            "already_observed": self.already_observed,
        }


@dataclass(frozen=True)
class Observation:
    """Tool output for one round (the candidate evidence set)."""

    call: ToolCall
    segments: tuple[ScoredSegment, ...]
    fine_clips: tuple[FineClip, ...] = ()
    metadata: dict = field(default_factory=dict)

    @property
    def segment_indices(self) -> list[int]:
        return [s.segment_index for s in self.segments]

    def to_dict(self) -> dict:
        return {
            "call": self.call.to_dict(),
            "segments": [s.to_dict() for s in self.segments],
            "fine_clips": [
                {"index": c.index, "start": c.start, "end": c.end, "text": c.text, "is_gap": c.is_gap}
                for c in self.fine_clips
            ],
            "metadata": dict(self.metadata),
        }


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """0-based positions of the ``k`` best scores, ties broken by ascending position."""
    order = np.lexsort((np.arange(len(scores)), -scores))
    return order[: min(k, len(scores))]


def minmax(values: np.ndarray) -> np.ndarray:
    """Rescale to [0, 1]; a constant vector maps to zeros."""
    if values.size == 0:
        return values.copy()
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def _quantize(x: np.ndarray) -> np.ndarray:
    return np.round(x, SCORE_DECIMALS) + 0.0


class ObservationTools:
    """Sparse and dense indices over one memory, and the tools that query them."""

    def __init__(
        self,
        memory: HierarchicalMemory,
        embedder: EmbeddingBackend,
        *,
        k1: float = 1.2,
        b: float = 0.75,
    ):
        self.memory = memory
        self.embedder = embedder
        anns = memory.annotations
        self.n = len(anns)

        self.keyword_field = BM25Field([tokenize(" ".join(a.keywords)) for a in anns], k1, b)
        kp_text = [kp for a in anns for kp in a.keypoints]
        self.kp_owner = np.array([i for i, a in enumerate(anns) for _ in a.keypoints], dtype=np.int64)
        self.kp_text = kp_text
        self.keypoint_field = BM25Field([tokenize(t) for t in kp_text], k1, b)

        dim = memory.embedding_dim
        self.desc_matrix = np.array([a.embedding_desc for a in anns], dtype=np.float64).reshape(self.n, dim)
        self.kp_matrix = np.array(
            [v for a in anns for v in a.embedding_keypoints], dtype=np.float64
        ).reshape(len(kp_text), dim)

    def embed_query(self, query: str) -> np.ndarray:
        vec = np.asarray(self.embedder.embed_batch([query])[0], dtype=np.float64)
        if vec.shape != (self.memory.embedding_dim,):
            raise PreconditionError(
                f"query embedding has dim {vec.shape[-1]}, memory uses {self.memory.embedding_dim}"
            )
        norm = np.linalg.norm(vec)
        return vec / norm if norm else vec

    @staticmethod
    def _query_terms(query: str) -> list[str]:
        if not isinstance(query, str) or not query.strip():
            raise PreconditionError("query must be non-empty")
        terms = list(dict.fromkeys(tokenize(query)))
        if not terms:
            raise PreconditionError(f"query {query!r} has no searchable terms")
        return terms

    # -- scoring (full vectors over all segments) ------------------------------

    def description_scores(self, query: str) -> np.ndarray:
        if not isinstance(query, str) or not query.strip():
            raise PreconditionError("query must be non-empty")
        q = self.embed_query(query)
        return np.clip(_quantize(self.desc_matrix @ q), -1.0, 1.0)

    def keyword_scores(self, query: str) -> np.ndarray:
        return _quantize(self.keyword_field.scores(self._query_terms(query)))

    def keypoint_parts(self, query: str) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Per-segment max dense and max sparse keypoint scores plus their arg-max keypoint rows.

        Segments without keypoints score 0 on both parts and have arg-max -1.
        """
        terms = self._query_terms(query)
        q = self.embed_query(query)
        dense_kp = np.clip(_quantize(self.kp_matrix @ q), -1.0, 1.0)
        sparse_kp = _quantize(self.keypoint_field.scores(terms))
        dense = np.zeros(self.n)
        sparse = np.zeros(self.n)
        dense_arg = np.full(self.n, -1, dtype=np.int64)
        sparse_arg = np.full(self.n, -1, dtype=np.int64)
        for row, owner in enumerate(self.kp_owner):
            if dense_arg[owner] < 0 or dense_kp[row] > dense[owner]:
                dense[owner], dense_arg[owner] = dense_kp[row], row
            if sparse_arg[owner] < 0 or sparse_kp[row] > sparse[owner]:
                sparse[owner], sparse_arg[owner] = sparse_kp[row], row
        return dense, sparse, dense_arg, sparse_arg

    def keypoint_scores(self, query: str, lam: float = DEFAULT_LAMBDA) -> np.ndarray:
        if not 0.0 <= lam <= 1.0:
            raise PreconditionError(f"lambda must be in [0, 1], got {lam}")
        dense, sparse, _, _ = self.keypoint_parts(query)
        return lam * minmax(dense) + (1.0 - lam) * minmax(sparse)

    # -- tools -----------------------------------------------------------------

    def desc_search(self, query: str, k: int = DEFAULT_K) -> list[ScoredSegment]:
        scores = self.description_scores(query)
        return [
            ScoredSegment(int(i) + 1, float(scores[i]), "description", (self.memory.annotations[i].description,))
            for i in top_k(scores, k)
        ]

    def keyword_search(self, query: str, k: int = DEFAULT_K) -> list[ScoredSegment]:
        scores = self.keyword_scores(query)
        terms = set(self._query_terms(query))
        out = []
        for i in top_k(scores, k):
            kws = self.memory.annotations[i].keywords
            matched = tuple(kw for kw in kws if terms & set(tokenize(kw)))
            out.append(ScoredSegment(int(i) + 1, float(scores[i]), "keyword", matched))
        return out

    def keypoint_search(self, query: str, lam: float = DEFAULT_LAMBDA, k: int = DEFAULT_K) -> list[ScoredSegment]:
        if not 0.0 <= lam <= 1.0:
            raise PreconditionError(f"lambda must be in [0, 1], got {lam}")
        dense, sparse, dense_arg, sparse_arg = self.keypoint_parts(query)
        scores = lam * minmax(dense) + (1.0 - lam) * minmax(sparse)
        out = []
        for i in top_k(scores, k):
            rows = [r for r in dict.fromkeys((int(dense_arg[i]), int(sparse_arg[i]))) if r >= 0]
            out.append(
                ScoredSegment(int(i) + 1, float(scores[i]), "keypoint", tuple(self.kp_text[r] for r in rows))
            )
        return out

    def _check_anchor(self, j: int) -> None:
        if isinstance(j, bool) or not isinstance(j, int) or not 1 <= j <= self.n:
            raise PreconditionError(f"anchor {j!r} outside 1..{self.n}")

    def neighbor(self, j: int, r: int = DEFAULT_RADIUS) -> list[ScoredSegment]:
        self._check_anchor(j)
        if isinstance(r, bool) or not isinstance(r, int) or not 1 <= r <= MAX_RADIUS:
            raise PreconditionError(f"radius must be in 1..{MAX_RADIUS}, got {r!r}")
        return [
            ScoredSegment(i, 0.0, "neighbor", (self.memory.annotations[i - 1].description,))
            for i in range(max(1, j - r), min(self.n, j + r) + 1)
            if i != j
        ]

    def fine_grained(self, j: int) -> list[FineClip]:
        self._check_anchor(j)
        seg = self.memory.mid_segments[j - 1]
        return [c for c in self.memory.fine_clips if seg.start <= c.start and c.end <= seg.end]

    # -- dispatch --------------------------------------------------------------

    def dispatch(self, call: ToolCall, evidence: Container[int] = ()) -> Observation:
        """Route ``call`` to its tool and flag segments already held in ``evidence``."""
        meta: dict = {}
        clips: tuple[FineClip, ...] = ()
        try:
            if call.tool == "description":
                found = self.desc_search(call.query, call.k)
            elif call.tool == "keyword":
                found = self.keyword_search(call.query, call.k)
            elif call.tool == "keypoint":
                found = self.keypoint_search(call.query, call.lam, call.k)
            elif call.tool == "neighbor":
                found = self.neighbor(call.anchor, call.radius)
                if call.anchor not in evidence:
                    meta["anchor_not_observed"] = True
            elif call.tool == "fine":
                clips = tuple(self.fine_grained(call.anchor))
                if call.anchor not in evidence:
                    meta["anchor_not_observed"] = True
                found = [
                    ScoredSegment(
                        call.anchor,
                        0.0,
                        "fine",
                        tuple(f"[{c.start:.1f}-{c.end:.1f}s] {c.text or '(no speech)'}" for c in clips),
                    )
                ]
            else:  # pragma: no cover - ToolCall validates the name
                raise DispatchError(f"unknown tool {call.tool!r}")
        except PreconditionError as exc:
            raise DispatchError(str(exc)) from exc
        flagged = tuple(
            ScoredSegment(s.segment_index, s.score, s.tool, s.matched_evidence, s.segment_index in evidence)
            for s in found
        )
        return Observation(call, flagged, clips, meta)
