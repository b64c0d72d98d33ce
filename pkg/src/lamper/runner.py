"""Benchmark execution: embed, train, evaluate, aggregate, report.

Datasets run in parallel on a bounded thread pool; each worker embeds
both splits for every needed prompt kind, then trains and scores one
SVM per method.  Per-dataset failures become masked cells plus WARN
records on stderr; only configuration and backend-construction problems
abort the run.  Aggregation and all report writes happen once, after
every worker has finished.

Progress streams to stderr as tab-separated records:
``timestamp  level  dataset  method  message``.
"""

from __future__ import annotations

import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import MethodSpec, RunConfig
from .datasets import list_datasets, load_dataset
from .embedding import (
    EmbeddingBackend,
    EmbeddingCache,
    HttpBackend,
    MockBackend,
    cache_key,
    embed_series,
    l2_normalize,
)
from .errors import LamperError, UnequalLengthError
from .prompts import PromptKind, RenderConfig
from .stats import (
    AccuracyMatrix,
    RankReport,
    compute_report,
    render_cd_diagram,
    write_per_dataset_csv,
    write_summary_csv,
)
from .svm import evaluate, train_multiclass


class RunLog:
    """Thread-safe structured logger for progress and warnings."""

    def __init__(self, stream=None):
        self.stream = stream if stream is not None else sys.stderr
        self._lock = threading.Lock()
        self.warnings: list[str] = []

    def log(self, level: str, dataset: str | None, method: str | None, message: str) -> None:
        ts = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        line = "\t".join([ts, level, dataset or "-", method or "-", message])
        with self._lock:
            print(line, file=self.stream, flush=True)
            if level == "WARN":
                self.warnings.append(line)

    def info(self, dataset, method, message):
        self.log("INFO", dataset, method, message)

    def warn(self, dataset, method, message):
        self.log("WARN", dataset, method, message)


class InstrumentedBackend(EmbeddingBackend):
    """Delegate that tracks request totals and peak in-flight concurrency."""

    def __init__(self, inner: EmbeddingBackend):
        self.inner = inner
        self.info = inner.info
        self._lock = threading.Lock()
        self._inflight = 0
        self.max_inflight = 0
        self.requests = 0

    def _enter(self):
        with self._lock:
            self._inflight += 1
            self.requests += 1
            if self._inflight > self.max_inflight:
                self.max_inflight = self._inflight

    def _exit(self):
        with self._lock:
            self._inflight -= 1

    def count_tokens(self, texts):
        self._enter()
        try:
            return self.inner.count_tokens(texts)
        finally:
            self._exit()

    def embed_texts(self, texts):
        self._enter()
        try:
            return self.inner.embed_texts(texts)
        finally:
            self._exit()


def make_backend(config: RunConfig) -> InstrumentedBackend:
    """Construct the configured backend behind the instrumentation shim."""
    if config.backend == "mock":
        # seed and dimension are part of the mock's identity so cache keys
        # from different mock settings never collide
        name = f"mock-d{config.mock_dimension}-s{config.mock_seed}"
        inner: EmbeddingBackend = MockBackend(
            dimension=config.mock_dimension,
            seed=config.mock_seed,
            max_tokens=config.mock_max_tokens,
            model_name=name,
        )
    elif config.backend == "http":
        inner = HttpBackend(config.endpoint)
    else:
        raise LamperError(f"unknown backend {config.backend!r}")
    return InstrumentedBackend(inner)


@dataclass(frozen=True)
class RunResult:
    """Everything a caller needs to inspect one finished run."""

    report: RankReport
    matrix: AccuracyMatrix
    output_files: tuple[str, ...]
    cache_stats: dict
    backend_requests: int
    max_inflight: int
    elapsed_seconds: float
    warnings: tuple[str, ...]


def _embed_split(backend, cache, config, rcfg, dataset_name, split_name,
                 split, kind) -> np.ndarray:
    feat_extra = ",".join(config.features) if kind is PromptKind.FP else ""
    rows = []
    for idx, series in enumerate(split):
        key = cache_key(dataset_name, split_name, idx, kind,
                        backend.info.model_name, rcfg, extra=feat_extra)
        vec = embed_series(backend, series.values, kind, rcfg, pooling="mean",
                           cache=cache, key=key, feature_names=config.features)
        if config.normalize_embeddings:
            vec = l2_normalize(vec)
        rows.append(vec)
    return np.stack(rows)


def _raw_matrix(split) -> np.ndarray:
    return np.stack([s.values for s in split])


def _dataset_cells(config: RunConfig, backend, cache, log: RunLog,
                   name: str, methods: Sequence[MethodSpec]) -> list[float | None]:
    """Accuracy per method for one dataset; None marks a masked cell."""
    try:
        ds = load_dataset(config.dataset_root, name)
    except (LamperError, OSError) as exc:
        log.warn(name, None, f"dataset skipped: {exc}")
        return [None] * len(methods)
    rcfg = RenderConfig(precision=config.precision)
    labels_train = np.array([s.label for s in ds.train], dtype=np.int64)
    labels_test = np.array([s.label for s in ds.test], dtype=np.int64)

    kind_feats: dict[PromptKind, tuple[np.ndarray, np.ndarray]] = {}
    kind_errors: dict[PromptKind, LamperError] = {}
    for kind in config.needed_kinds():
        try:
            train_x = _embed_split(backend, cache, config, rcfg, name, "train",
                                   ds.train, kind)
            test_x = _embed_split(backend, cache, config, rcfg, name, "test",
                                  ds.test, kind)
            kind_feats[kind] = (train_x, test_x)
        except LamperError as exc:
            kind_errors[kind] = exc
            log.warn(name, kind.value, f"embedding failed: {exc}")

    cells: list[float | None] = []
    for spec in methods:
        try:
            if spec.source == "ts":
                if not ds.equal_length():
                    raise UnequalLengthError(
                        f"{name}: raw-series method needs equal-length series")
                train_x, test_x = _raw_matrix(ds.train), _raw_matrix(ds.test)
            else:
                missing = [k for k in spec.kinds if k in kind_errors]
                if missing:
                    raise kind_errors[missing[0]]
                train_x = np.hstack([kind_feats[k][0] for k in spec.kinds])
                test_x = np.hstack([kind_feats[k][1] for k in spec.kinds])
            model = train_multiclass(train_x, labels_train, config.svm)
            if any(not m.converged for _, _, m in model.machines):
                log.warn(name, spec.name, "svm hit the iteration guard before converging")
            acc = evaluate(model, test_x, labels_test)
            cells.append(acc)
            log.info(name, spec.name, f"accuracy {acc:.4f}")
        except LamperError as exc:
            cells.append(None)
            log.warn(name, spec.name, f"cell masked: {exc}")
    return cells


def run_benchmark(config: RunConfig, log_stream=None) -> RunResult:
    """Execute a full configured run and write the four report files."""
    t0 = time.monotonic()
    log = RunLog(log_stream)
    methods = config.method_specs()
    if len(methods) < 2:
        raise LamperError("rank statistics need at least two methods; "
                          "declare more prompt kinds, fusions, or the raw-series benchmark")
    backend = make_backend(config)
    names = list_datasets(config.dataset_root)
    if config.dataset_filter is not None:
        available = set(names)
        missing = [n for n in config.dataset_filter if n not in available]
        if missing:
            raise LamperError(f"datasets not found under {config.dataset_root}: "
                              + ", ".join(missing))
        wanted = set(config.dataset_filter)
        names = [n for n in names if n in wanted]
    if not names:
        raise LamperError(f"no datasets found under {config.dataset_root}")
    cache = EmbeddingCache(config.cache_dir)
    log.info(None, None,
             f"run start: {len(names)} datasets, {len(methods)} methods, "
             f"backend {backend.info.model_name}, concurrency {config.concurrency}")

    results: dict[str, list[float | None]] = {}
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        futures = {
            pool.submit(_dataset_cells, config, backend, cache, log, name, methods): name
            for name in names
        }
        for future, name in futures.items():
            results[name] = future.result()

    k = len(methods)
    values = np.zeros((k, len(names)))
    mask = np.zeros((k, len(names)), dtype=bool)
    for j, name in enumerate(names):
        for i, cell in enumerate(results[name]):
            if cell is None:
                mask[i, j] = True
            else:
                values[i, j] = cell
    matrix = AccuracyMatrix(
        methods=tuple(s.name for s in methods),
        datasets=tuple(names),
        values=values,
        mask=mask,
    )
    report = compute_report(matrix)

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary_path = out / "summary.csv"
    per_dataset_path = out / "per_dataset.csv"
    ablation_path = out / "ablation.csv"
    diagram_path = out / "cd_diagram.svg"
    write_summary_csv(summary_path, report)
    write_per_dataset_csv(per_dataset_path, matrix)
    pair_names = [s.name for s in methods if s.source == "fusion" and len(s.kinds) == 2]
    write_summary_csv(ablation_path, report, method_filter=pair_names)
    with open(diagram_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_cd_diagram(report))

    elapsed = time.monotonic() - t0
    stats = cache.stats
    log.info(None, None,
             f"run done in {elapsed:.1f}s: ranked {report.n_datasets_ranked}/{len(names)} "
             f"datasets, cache hits {stats['hits']}/{stats['hits'] + stats['misses']}, "
             f"peak in-flight {backend.max_inflight}")
    if report.skipped:
        log.info(None, None, "skipped datasets: " + ", ".join(report.skipped))
    return RunResult(
        report=report,
        matrix=matrix,
        output_files=tuple(str(p) for p in
                           (summary_path, per_dataset_path, ablation_path, diagram_path)),
        cache_stats=stats,
        backend_requests=backend.requests,
        max_inflight=backend.max_inflight,
        elapsed_seconds=elapsed,
        warnings=tuple(log.warnings),
    )
