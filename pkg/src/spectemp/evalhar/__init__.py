from spectemp.evalhar.harness import (
    EvalReport,
    GridResult,
    ReportRow,
    compress,
    gamma_grid,
    grid_search_gamma,
    run_matrix,
    score_compressed,
)
from spectemp.evalhar.metrics import mrr_at_10, ndcg_at_10, recall_at_k
from spectemp.evalhar.search import RetrievalRun, exact_search
from spectemp.evalhar.synthetic import SynthSpec, SyntheticTask, generate_synthetic

__all__ = [
    "EvalReport",
    "GridResult",
    "ReportRow",
    "RetrievalRun",
    "SynthSpec",
    "SyntheticTask",
    "compress",
    "exact_search",
    "gamma_grid",
    "generate_synthetic",
    "grid_search_gamma",
    "mrr_at_10",
    "ndcg_at_10",
    "recall_at_k",
    "run_matrix",
    "score_compressed",
]
