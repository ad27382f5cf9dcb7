"""Method x dimension x seed evaluation grids and the oracle gamma grid search."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from spectemp import baselines
from spectemp.errors import ConfigError
from spectemp.evalhar.metrics import METRICS, evaluate
from spectemp.evalhar.search import exact_search
from spectemp.spectral import as_array
from spectemp.tempering import DEFAULT_TAIL_FRACTION, build_plan, fit_model, transform

METHODS = (
    "full",
    "prefix_truncate",
    "random_truncate",
    "random_project",
    "pca",
    "whitening",
    "fixed_gamma",
    "spectemp",
)
RANDOM_METHODS = ("random_truncate", "random_project")
MODEL_METHODS = ("pca", "whitening", "fixed_gamma", "spectemp")
DEFAULT_SEEDS = (1999, 5, 2026)


def compress(method, k, docs, queries, model=None, seed=1999, gamma_fixed=0.5, l2_normalize=True):
    """Apply one compression method to docs and queries alike."""
    if method == "full":
        d = as_array(docs).astype(np.float64)
        q = as_array(queries).astype(np.float64)
        return d, q
    if method == "spectemp":
        plan = build_plan(model, k, l2_normalize=l2_normalize)
        return transform(plan, docs), transform(plan, queries)
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
    spec = baselines.BaselineSpec(method, k, seed=seed, gamma=gamma_fixed, l2_normalize=l2_normalize)
    return (
        baselines.apply_baseline(spec, docs, model),
        baselines.apply_baseline(spec, queries, model),
    )


def score_compressed(docs_c, queries_c, qrels, metrics, doc_ids=None, query_ids=None,
                     similarity="cosine", cutoff=10) -> dict[str, float]:
    run = exact_search(docs_c, queries_c, doc_ids, query_ids, similarity=similarity, cutoff=cutoff)
    return {m: evaluate(run, qrels, m) for m in metrics}


def gamma_grid(step: float) -> list[float]:
    if not (0.0 < step <= 1.0):
        raise ConfigError(f"grid step must lie in (0, 1], got {step}")
    n = round(1.0 / step)
    if abs(n * step - 1.0) > 1e-9:
        raise ConfigError(f"grid step {step} does not divide 1.0 into whole steps")
    return [i / n for i in range(n + 1)]


@dataclass
class GridResult:
    k: int
    best_gamma: float
    best_score: float
    curve: list[tuple[float, float]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["gamma", "score"])
        for g, s in self.curve:
            writer.writerow([f"{g:.2f}", repr(s)])
        return buf.getvalue()


def grid_search_gamma(
    model,
    docs,
    queries,
    qrels,
    k: int,
    grid_step: float = 0.05,
    metric: str = "ndcg_at_10",
    doc_ids=None,
    query_ids=None,
    similarity: str = "cosine",
    l2_normalize: bool = True,
) -> GridResult:
    """Score fixed-gamma compression over a uniform grid on [0, 1].

    Ties go to the smallest gamma.
    """
    curve = []
    best_gamma, best_score = None, -np.inf
    for g in gamma_grid(grid_step):
        plan = build_plan(model, k, gamma=g, l2_normalize=l2_normalize)
        score = score_compressed(
            transform(plan, docs), transform(plan, queries), qrels, [metric],
            doc_ids, query_ids, similarity,
        )[metric]
        curve.append((g, score))
        if score > best_score:
            best_gamma, best_score = g, score
    return GridResult(k=k, best_gamma=best_gamma, best_score=best_score, curve=curve)


@dataclass(frozen=True)
class ReportRow:
    method: str
    k: int
    seed: int | None  # None marks the mean across seeds
    metric: str
    value: float


@dataclass
class EvalReport:
    rows: list[ReportRow] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def value(self, method, k, metric, seed=None) -> float:
        for r in self.rows:
            if (r.method, r.k, r.metric, r.seed) == (method, k, metric, seed):
                return r.value
        raise KeyError((method, k, metric, seed))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["method", "k", "seed", "metric", "value"])
        for r in self.rows:
            writer.writerow([r.method, r.k, "mean" if r.seed is None else r.seed, r.metric, repr(r.value)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "rows": [asdict(r) for r in self.rows]}, indent=2)

    def to_table(self) -> str:
        """Seed-averaged values on a 0-100 scale, one block per metric."""
        means = [r for r in self.rows if r.seed is None]
        ks = sorted({r.k for r in means}, reverse=True)
        methods = list(dict.fromkeys(r.method for r in means))
        lines = []
        for metric in dict.fromkeys(r.metric for r in means):
            cell = {(r.method, r.k): r.value for r in means if r.metric == metric}
            lines.append(f"{metric} (x100, mean over {len(self.config.get('seeds', []))} seeds)")
            lines.append(f"{'method':<16}" + "".join(f"{k:>9}" for k in ks))
            for m in methods:
                vals = "".join(
                    f"{100 * cell[(m, k)]:>9.2f}" if (m, k) in cell else f"{'-':>9}" for k in ks
                )
                lines.append(f"{m:<16}{vals}")
            lines.append("")
        return "\n".join(lines)


def run_matrix(
    methods,
    dims,
    docs,
    queries,
    qrels,
    seeds=DEFAULT_SEEDS,
    metrics=("ndcg_at_10",),
    doc_ids=None,
    query_ids=None,
    model=None,
    tail_fraction: float = DEFAULT_TAIL_FRACTION,
    sample_cap: int = 1_000_000,
    similarity: str = "cosine",
    l2_normalize: bool = True,
    gamma_fixed: float = 0.5,
) -> EvalReport:
    """Evaluate every (method, k, seed) cell and append per-cell seed means.

    Without an explicit ``model`` one is fitted per seed, which only matters
    when the corpus is larger than ``sample_cap``. The ``full`` method ignores
    ``dims`` and is reported once at the native dimension.
    """
    d = as_array(docs).shape[1]
    for k in dims:
        if not (1 <= k <= d):
            raise ConfigError(f"target dimension {k} outside [1, {d}]")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
    for metric in metrics:
        if metric not in METRICS:
            raise ConfigError(f"unknown metric {metric!r}; expected one of {METRICS}")
    seeds = list(seeds)
    if not seeds:
        raise ConfigError("at least one seed is required")

    n = as_array(docs).shape[0]
    models = {}

    def model_for(seed):
        if model is not None:
            return model, "given"
        key = seed if n > sample_cap else "all"
        if key not in models:
            models[key] = fit_model(docs, sample_cap, seed, tail_fraction)
        return models[key], key

    cache: dict[tuple, dict[str, float]] = {}
    rows = []
    for method in methods:
        for k in ([d] if method == "full" else dims):
            per_seed = []
            for seed in seeds:
                if method in MODEL_METHODS:
                    mdl, mkey = model_for(seed)
                    key = (method, k, mkey)
                elif method in RANDOM_METHODS:
                    mdl, key = None, (method, k, seed)
                else:
                    mdl, key = None, (method, k)
                if key not in cache:
                    dc, qc = compress(method, k, docs, queries, mdl, seed, gamma_fixed, l2_normalize)
                    cache[key] = score_compressed(dc, qc, qrels, metrics, doc_ids, query_ids, similarity)
                per_seed.append(cache[key])
                rows.extend(ReportRow(method, k, seed, m, cache[key][m]) for m in metrics)
            for m in metrics:
                rows.append(ReportRow(method, k, None, m, float(np.mean([s[m] for s in per_seed]))))

    config = {
        "tail_fraction": tail_fraction,
        "sample_cap": sample_cap,
        "similarity": similarity,
        "l2_normalize": l2_normalize,
        "gamma_fixed": gamma_fixed,
        "seeds": seeds,
        "dims": list(dims),
        "methods": list(methods),
        "metrics": list(metrics),
    }
    return EvalReport(rows=rows, config=config)
