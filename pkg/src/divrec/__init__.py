"""Quality-diversity batch recommendation with history-aware DPP kernels."""

from .adaptive import (
    HedgeState,
    OracleLambda,
    RegretLedger,
    hedge_update,
    oracle_lambda,
    regret_and_bound,
    score_gradient,
)
from .baselines import RerankConfig, mmr_select, xquad_select
from .data import (
    FileItemStore,
    HistoryLog,
    InMemoryItemStore,
    generate_synthetic,
    load_items,
    load_scores,
    save_items_csv,
    save_items_packed,
    store_rows,
    synthetic_model,
)
from .exceptions import (
    AssumptionViolationError,
    ConfigError,
    DegenerateItemError,
    DegenerateKernelError,
    DivrecError,
    FormatError,
    HistoryDegenerateError,
    InvalidInputError,
    MissingScoreError,
    NotPositiveDefiniteError,
    RankDeficientError,
    SkipRound,
    StorageError,
)
from .features import NystroemFeatureMap, fit_nystroem, log_volume
from .feedback import (
    NOISE_KINDS,
    NoiseChannel,
    PrecomputedMatrixModel,
    SyntheticLinearModel,
    observe,
)
from .inference import Selection, diversity_log_volume, greedy_map, sample_kdpp, set_score
from .kernels import KernelSpec, kernel_matrix
from .likelihood import METHODS, LFactor, LikelihoodSpec, build_l_factor
from .metrics import (
    DatasetDiagnostics,
    RoundMetrics,
    TrajectorySummary,
    aggregate,
    dataset_diagnostics,
    effective_diversity,
    gini_index,
    round_metrics,
)
from .neighbors import NeighborIndex, build_index
from .recommender import DQDRecommender, MMRReranker, XQuadReranker
from .replay import (
    BenchmarkReport,
    RunConfig,
    grid_oracle_rerun,
    prepare_dataset,
    run_benchmark,
    run_trajectory,
    sample_history,
)

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolationError",
    "BenchmarkReport",
    "ConfigError",
    "DQDRecommender",
    "DatasetDiagnostics",
    "DegenerateItemError",
    "DegenerateKernelError",
    "DivrecError",
    "FileItemStore",
    "FormatError",
    "HedgeState",
    "HistoryDegenerateError",
    "HistoryLog",
    "InMemoryItemStore",
    "InvalidInputError",
    "KernelSpec",
    "LFactor",
    "LikelihoodSpec",
    "METHODS",
    "MMRReranker",
    "MissingScoreError",
    "NOISE_KINDS",
    "NeighborIndex",
    "NoiseChannel",
    "NotPositiveDefiniteError",
    "NystroemFeatureMap",
    "OracleLambda",
    "PrecomputedMatrixModel",
    "RankDeficientError",
    "RegretLedger",
    "RerankConfig",
    "RoundMetrics",
    "RunConfig",
    "Selection",
    "SkipRound",
    "StorageError",
    "SyntheticLinearModel",
    "TrajectorySummary",
    "XQuadReranker",
    "aggregate",
    "build_index",
    "build_l_factor",
    "dataset_diagnostics",
    "diversity_log_volume",
    "effective_diversity",
    "fit_nystroem",
    "generate_synthetic",
    "gini_index",
    "greedy_map",
    "grid_oracle_rerun",
    "hedge_update",
    "kernel_matrix",
    "load_items",
    "load_scores",
    "log_volume",
    "mmr_select",
    "observe",
    "oracle_lambda",
    "prepare_dataset",
    "regret_and_bound",
    "round_metrics",
    "run_benchmark",
    "run_trajectory",
    "sample_history",
    "sample_kdpp",
    "save_items_csv",
    "save_items_packed",
    "score_gradient",
    "set_score",
    "store_rows",
    "synthetic_model",
    "xquad_select",
]
