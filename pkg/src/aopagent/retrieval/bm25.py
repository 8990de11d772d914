"""Okapi BM25 over small in-memory corpora."""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

import numpy as np


def bm25_idf(n_docs: int, df: int) -> float:
    return math.log((n_docs - df + 0.5) / (df + 0.5) + 1.0)


class BM25Field:
    """One indexed field: a list of token bags scored with Okapi BM25.

    ``k1`` and ``b`` default to 1.2 and 0.75; idf is the +1-smoothed variant,
    so it is always positive.
    """

    def __init__(self, docs: Sequence[Sequence[str]], k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b
        self.n_docs = len(docs)
        self.doc_len = np.array([len(d) for d in docs], dtype=np.float64)
        self.avgdl = float(self.doc_len.mean()) if self.n_docs else 0.0
        self.df: Counter[str] = Counter()
        self.postings: dict[str, list[tuple[int, int]]] = {}
        for i, doc in enumerate(docs):
            for term, tf in Counter(doc).items():
                self.df[term] += 1
                self.postings.setdefault(term, []).append((i, tf))

    def idf(self, term: str) -> float:
        return bm25_idf(self.n_docs, self.df.get(term, 0))

    def scores(self, query_terms: Sequence[str]) -> np.ndarray:
        """BM25 of every document against the unique ``query_terms``."""
        out = np.zeros(self.n_docs)
        if self.n_docs == 0 or self.avgdl == 0.0:
            return out
        norm = self.k1 * (1.0 - self.b + self.b * self.doc_len / self.avgdl)
        for term in dict.fromkeys(query_terms):
            posting = self.postings.get(term)
            if not posting:
                continue
            idf = self.idf(term)
            ids = np.fromiter((i for i, _ in posting), dtype=np.int64, count=len(posting))
            tf = np.fromiter((t for _, t in posting), dtype=np.float64, count=len(posting))
            out[ids] += idf * tf * (self.k1 + 1.0) / (tf + norm[ids])
        return out
