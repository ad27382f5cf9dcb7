"""Exact (brute-force) top-k retrieval over in-memory vectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from spectemp.errors import ConfigError, ShapeError
from spectemp.spectral import as_array
from spectemp.tempering import l2_normalize_rows

SIMILARITIES = ("cosine", "dot")
_BLOCK = 256


@dataclass
class RetrievalRun:
    """Ranked lists per query, best first; ties ordered by doc id."""

    ranked: dict[str, list[tuple[str, float]]] = field(default_factory=dict)
    cutoff: int = 10
    similarity: str = "cosine"

    def doc_ids(self, qid: str) -> list[str]:
        return [doc for doc, _ in self.ranked.get(qid, ())]


def default_ids(prefix: str, n: int) -> list[str]:
    width = len(str(max(n - 1, 0)))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


def _id_ranks(ids) -> np.ndarray:
    order = sorted(range(len(ids)), key=ids.__getitem__)
    ranks = np.empty(len(ids), dtype=np.int64)
    ranks[order] = np.arange(len(ids))
    return ranks


def exact_search(
    docs,
    queries,
    doc_ids=None,
    query_ids=None,
    similarity: str = "cosine",
    cutoff: int = 10,
) -> RetrievalRun:
    if similarity not in SIMILARITIES:
        raise ConfigError(f"unknown similarity {similarity!r}; expected one of {SIMILARITIES}")
    if cutoff < 1:
        raise ConfigError(f"cutoff must be >= 1, got {cutoff}")
    d = as_array(docs).astype(np.float64)
    q = as_array(queries).astype(np.float64)
    if d.shape[1] != q.shape[1]:
        raise ShapeError(f"doc dim {d.shape[1]} != query dim {q.shape[1]}")
    nd, nq = d.shape[0], q.shape[0]
    doc_ids = list(doc_ids) if doc_ids is not None else default_ids("d", nd)
    query_ids = list(query_ids) if query_ids is not None else default_ids("q", nq)
    if len(doc_ids) != nd or len(query_ids) != nq:
        raise ShapeError("id list length does not match matrix rows")
    if similarity == "cosine":
        d = l2_normalize_rows(d)
        q = l2_normalize_rows(q)

    id_rank = _id_ranks(doc_ids)
    c = min(cutoff, nd)
    run = RetrievalRun(cutoff=cutoff, similarity=similarity)
    for start in range(0, nq, _BLOCK):
        scores = q[start : start + _BLOCK] @ d.T
        if c < nd:
            kth = np.partition(scores, nd - c, axis=1)[:, nd - c]
        for row, s in enumerate(scores):
            cand = np.flatnonzero(s >= kth[row]) if c < nd else np.arange(nd)
            top = cand[np.lexsort((id_rank[cand], -s[cand]))[:c]]
            run.ranked[query_ids[start + row]] = [(doc_ids[j], float(s[j])) for j in top]
    return run
