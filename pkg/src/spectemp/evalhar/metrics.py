"""Rank-based effectiveness metrics over a RetrievalRun and a QrelsTable."""

from __future__ import annotations

import logging
import math

from spectemp.errors import ConfigError

logger = logging.getLogger(__name__)

METRICS = ("mrr_at_10", "ndcg_at_10", "recall_at_k")


def _judged(run, qrels):
    missing = 0
    for qid, ranked in run.ranked.items():
        if qid not in qrels:
            missing += 1
            continue
        yield [doc for doc, _ in ranked], qrels.grades(qid)
    if missing:
        logger.warning("%d queries in the run have no judgments and were skipped", missing)


def _mean(values) -> float:
    values = list(values)
    return sum(values) / len(values) if values else 0.0


def reciprocal_rank(ranked, grades, cutoff=10) -> float:
    for rank, doc in enumerate(ranked[:cutoff], start=1):
        if grades.get(doc, 0) > 0:
            return 1.0 / rank
    return 0.0


def dcg(gains, cutoff=10) -> float:
    return sum((2.0**g - 1.0) / math.log2(r + 1) for r, g in enumerate(gains[:cutoff], start=1))


def ndcg(ranked, grades, cutoff=10) -> float | None:
    ideal = dcg(sorted(grades.values(), reverse=True), cutoff)
    if ideal <= 0:
        return None
    return dcg([grades.get(doc, 0) for doc in ranked], cutoff) / ideal


def mrr_at_10(run, qrels) -> float:
    return _mean(reciprocal_rank(r, g, 10) for r, g in _judged(run, qrels))


def ndcg_at_10(run, qrels) -> float:
    scores = (ndcg(r, g, 10) for r, g in _judged(run, qrels))
    return _mean(s for s in scores if s is not None)


def recall_at_k(run, qrels, k: int | None = None) -> float:
    """Fraction of relevant docs found in the top ``k`` (default: the run cutoff)."""
    k = run.cutoff if k is None else k

    def one(ranked, grades):
        relevant = {doc for doc, g in grades.items() if g > 0}
        return len(relevant.intersection(ranked[:k])) / len(relevant)

    return _mean(one(r, g) for r, g in _judged(run, qrels))


def evaluate(run, qrels, metric: str) -> float:
    if metric == "mrr_at_10":
        return mrr_at_10(run, qrels)
    if metric == "ndcg_at_10":
        return ndcg_at_10(run, qrels)
    if metric == "recall_at_k":
        return recall_at_k(run, qrels)
    raise ConfigError(f"unknown metric {metric!r}; expected one of {METRICS}")
