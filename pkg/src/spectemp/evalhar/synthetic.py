"""Spiked-covariance retrieval tasks with a known relevant document per query."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from spectemp.errors import ConfigError
from spectemp.evalhar.search import default_ids
from spectemp.matio import EmbeddingMatrix, QrelsTable


@dataclass(frozen=True)
class SynthSpec:
    """Docs ~ N(0, R diag(spikes..., noise...) R^T) for a seeded rotation R.

    ``spikes`` lists ``(count, variance)`` tiers occupying the leading axes
    before rotation; the remaining axes get ``noise_variance``. Query j is a
    copy of one document plus ``query_noise * N(0, I)``, plus, when
    ``query_drift`` is non-zero, ``query_drift`` times a fresh draw from the
    document distribution itself. The drift term makes query-document
    disagreement grow with each direction's variance, as happens along the
    dominant directions of real embeddings.
    """

    n_docs: int
    n_queries: int
    d: int
    spikes: tuple[tuple[int, float], ...] = field(default_factory=tuple)
    noise_variance: float = 1.0
    query_noise: float = 0.0
    seed: int = 1999
    query_drift: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "spikes", tuple((int(c), float(v)) for c, v in self.spikes))
        if self.n_docs < 1 or self.n_queries < 1 or self.d < 1:
            raise ConfigError("n_docs, n_queries and d must all be >= 1")
        if sum(c for c, _ in self.spikes) > self.d:
            raise ConfigError("spike counts exceed the dimension")
        if any(c < 0 for c, _ in self.spikes):
            raise ConfigError("spike counts must be non-negative")
        if any(v <= 0 for _, v in self.spikes) or self.noise_variance <= 0:
            raise ConfigError("all variances must be positive")
        if self.query_noise < 0 or self.query_drift < 0:
            raise ConfigError("query noise and drift must be non-negative")

    def variances(self) -> np.ndarray:
        v = np.full(self.d, self.noise_variance)
        pos = 0
        for count, var in self.spikes:
            v[pos : pos + count] = var
            pos += count
        return v


@dataclass(eq=False)
class SyntheticTask:
    docs: EmbeddingMatrix
    queries: EmbeddingMatrix
    qrels: QrelsTable
    doc_ids: list[str]
    query_ids: list[str]
    rotation: np.ndarray
    source_docs: np.ndarray


def random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def generate_synthetic(spec: SynthSpec) -> SyntheticTask:
    rng = np.random.default_rng(spec.seed)
    rot = random_rotation(rng, spec.d)
    latent = rng.standard_normal((spec.n_docs, spec.d)) * np.sqrt(spec.variances())
    docs = (latent @ rot.T).astype(np.float32)

    source = rng.choice(spec.n_docs, size=spec.n_queries, replace=spec.n_queries > spec.n_docs)
    noise = rng.standard_normal((spec.n_queries, spec.d))
    queries = docs[source].astype(np.float64) + spec.query_noise * noise
    if spec.query_drift > 0:
        drift = rng.standard_normal((spec.n_queries, spec.d)) * np.sqrt(spec.variances())
        queries += spec.query_drift * (drift @ rot.T)
    queries = queries.astype(np.float32)

    doc_ids = default_ids("d", spec.n_docs)
    query_ids = default_ids("q", spec.n_queries)
    qrels = QrelsTable({qid: [(doc_ids[s], 1)] for qid, s in zip(query_ids, source)})
    return SyntheticTask(
        docs=EmbeddingMatrix(docs, label="synthetic-docs"),
        queries=EmbeddingMatrix(queries, label="synthetic-queries"),
        qrels=qrels,
        doc_ids=doc_ids,
        query_ids=query_ids,
        rotation=rot,
        source_docs=source,
    )
