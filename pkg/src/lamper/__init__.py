"""Benchmark harness for zero-shot time-series classification.

Pipeline: serialize a univariate series into prompts, embed the prompts
with a frozen language model behind a pluggable backend, pool and fuse
the embeddings, classify with an RBF-kernel SVM, and aggregate accuracy
into average ranks with Nemenyi critical-difference statistics.
"""

from .config import MethodSpec, RunConfig, load_config, validate_config
from .datasets import LabeledSeries, TimeSeriesDataset, list_datasets, load_dataset
from .embedding import (
    BackendInfo,
    EmbeddingBackend,
    EmbeddingCache,
    HttpBackend,
    MockBackend,
    embed_series,
    fuse,
)
from .errors import (
    BackendError,
    BudgetError,
    ConfigError,
    DatasetError,
    LamperError,
    UnequalLengthError,
)
from .features import CANONICAL_FEATURES, FeatureVector, extract_features
from .prompts import (
    PromptKind,
    RenderConfig,
    SubPrompt,
    build_ddp,
    build_fp,
    build_sdp,
    compute_chunk_len,
)
from .runner import RunResult, run_benchmark
from .stats import (
    AccuracyMatrix,
    RankReport,
    average_ranks,
    cd_cliques,
    compute_report,
    friedman_statistic,
    nemenyi_cd,
    render_cd_diagram,
)
from .svm import BinarySvm, SvmConfig, SvmModel, evaluate, predict, train_binary_smo, train_multiclass

__version__ = "0.1.0"

__all__ = [
    "AccuracyMatrix",
    "BackendError",
    "BackendInfo",
    "BinarySvm",
    "BudgetError",
    "CANONICAL_FEATURES",
    "ConfigError",
    "DatasetError",
    "EmbeddingBackend",
    "EmbeddingCache",
    "FeatureVector",
    "HttpBackend",
    "LabeledSeries",
    "LamperError",
    "MethodSpec",
    "MockBackend",
    "PromptKind",
    "RankReport",
    "RenderConfig",
    "RunConfig",
    "RunResult",
    "SubPrompt",
    "SvmConfig",
    "SvmModel",
    "TimeSeriesDataset",
    "UnequalLengthError",
    "average_ranks",
    "build_ddp",
    "build_fp",
    "build_sdp",
    "cd_cliques",
    "compute_chunk_len",
    "compute_report",
    "embed_series",
    "evaluate",
    "extract_features",
    "friedman_statistic",
    "fuse",
    "list_datasets",
    "load_config",
    "load_dataset",
    "nemenyi_cd",
    "predict",
    "render_cd_diagram",
    "run_benchmark",
    "train_binary_smo",
    "train_multiclass",
    "validate_config",
    "__version__",
]
