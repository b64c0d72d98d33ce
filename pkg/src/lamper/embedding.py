"""Embedding backends, pooling, fusion and the on-disk vector cache.

Two backends exist: a fully deterministic mock (hash-seeded unit vectors,
used for tests and desk-scale runs) and an HTTP client speaking the wire
protocol::

    GET  /info          -> {"model": str, "max_tokens": int, "dimension": int}
    POST /count_tokens  {"texts": [...]} -> {"counts": [...]}
    POST /embed         {"texts": [...]} -> {"embeddings": [[...], ...]}

Cached vectors are one binary record per key: little-endian uint32
dimension followed by ``dimension`` little-endian float64 components,
stored under a content-addressed file name and written atomically.
"""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BackendError, BudgetError
from .features import extract_features
from .prompts import PromptKind, RenderConfig, build_ddp, build_fp, build_sdp

__all__ = [
    "BackendInfo",
    "EmbeddingBackend",
    "MockBackend",
    "HttpBackend",
    "mock_embed",
    "mean_pool",
    "max_pool",
    "l2_normalize",
    "fuse",
    "cache_key",
    "EmbeddingCache",
    "embed_series",
]


@dataclass(frozen=True)
class BackendInfo:
    model_name: str
    max_tokens: int
    dimension: int

    def __post_init__(self):
        if self.max_tokens < 1 or self.dimension < 1:
            raise ValueError("max_tokens and dimension must be positive")


class EmbeddingBackend:
    """Behavioral contract shared by all backends."""

    info: BackendInfo

    def count_tokens(self, texts: Sequence[str]) -> list[int]:
        raise NotImplementedError

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        """One row per text, order-aligned, shape (len(texts), dimension)."""
        raise NotImplementedError

    def count_text(self, text: str) -> int:
        return self.count_tokens([text])[0]


def mock_embed(text: str, dimension: int, seed: int) -> np.ndarray:
    """Deterministic unit-norm vector from a stable hash of (seed, text)."""
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    digest = hashlib.sha256(f"{seed}\x1f{text}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    v = rng.standard_normal(dimension)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:  # unreachable in practice, keeps the unit-norm contract total
        v[0] = 1.0
        norm = 1.0
    return v / norm


class MockBackend(EmbeddingBackend):
    """Hash-based stand-in for a language model.

    Token rule: 2 special tokens plus one token per whitespace-delimited
    piece.  Embeddings are deterministic across runs and platforms.
    """

    def __init__(self, dimension: int = 32, seed: int = 0, max_tokens: int = 512,
                 model_name: str = "mock"):
        self.info = BackendInfo(model_name=model_name, max_tokens=max_tokens,
                                dimension=dimension)
        self.seed = seed

    def count_tokens(self, texts: Sequence[str]) -> list[int]:
        return [2 + len(t.split()) for t in texts]

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        counts = self.count_tokens(texts)
        over = [i for i, c in enumerate(counts) if c > self.info.max_tokens]
        if over:
            raise BudgetError(
                f"text {over[0]} counts {counts[over[0]]} tokens, "
                f"budget is {self.info.max_tokens}"
            )
        return np.stack([mock_embed(t, self.info.dimension, self.seed) for t in texts])


class HttpBackend(EmbeddingBackend):
    """Client for a remote embedding server speaking the wire protocol."""

    def __init__(self, endpoint: str, timeout: float = 60.0, retries: int = 3,
                 backoff: float = 0.5):
        import requests

        self._requests = requests
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self._session = requests.Session()
        payload = self._call("GET", "/info")
        self.info = BackendInfo(
            model_name=str(payload["model"]),
            max_tokens=int(payload["max_tokens"]),
            dimension=int(payload["dimension"]),
        )

    def _call(self, method: str, path: str, body: dict | None = None) -> dict:
        url = self.endpoint + path
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._session.request(method, url, json=body, timeout=self.timeout)
            except self._requests.RequestException as exc:
                last_exc = exc
            else:
                if resp.status_code == 400:
                    try:
                        detail = resp.json().get("error", resp.text)
                    except ValueError:
                        detail = resp.text
                    raise BackendError(f"backend rejected request: {detail}")
                if resp.status_code == 200:
                    return resp.json()
                last_exc = BackendError(f"{url} returned status {resp.status_code}")
            if attempt < self.retries:
                time.sleep(self.backoff * (2 ** attempt))
        raise BackendError(f"backend unreachable after {self.retries + 1} attempts: {last_exc}")

    def count_tokens(self, texts: Sequence[str]) -> list[int]:
        return [int(c) for c in self._call("POST", "/count_tokens", {"texts": list(texts)})["counts"]]

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        rows = self._call("POST", "/embed", {"texts": list(texts)})["embeddings"]
        arr = np.asarray(rows, dtype=np.float64)
        if arr.shape != (len(texts), self.info.dimension):
            raise BackendError(
                f"backend returned shape {arr.shape}, "
                f"expected ({len(texts)}, {self.info.dimension})"
            )
        return arr


def mean_pool(embeddings: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Componentwise arithmetic mean over a nonempty list of equal-dim vectors."""
    embeddings = [np.asarray(e, dtype=np.float64) for e in embeddings]
    if not embeddings:
        raise ValueError("cannot pool an empty embedding list")
    dims = {e.shape for e in embeddings}
    if len(dims) != 1:
        raise ValueError(f"mixed embedding dimensions: {sorted(dims)}")
    return np.mean(np.stack(embeddings), axis=0)


def max_pool(embeddings: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Componentwise maximum; alternative pooling behind the config switch."""
    embeddings = [np.asarray(e, dtype=np.float64) for e in embeddings]
    if not embeddings:
        raise ValueError("cannot pool an empty embedding list")
    dims = {e.shape for e in embeddings}
    if len(dims) != 1:
        raise ValueError(f"mixed embedding dimensions: {sorted(dims)}")
    return np.max(np.stack(embeddings), axis=0)


POOLERS = {"mean": mean_pool, "max": max_pool}


def l2_normalize(vector: np.ndarray) -> np.ndarray:
    """Scale to unit Euclidean norm; an all-zero vector is returned as is."""
    v = np.asarray(vector, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return v.copy()
    return v / norm


def fuse(parts: Sequence[tuple[PromptKind, np.ndarray]]) -> np.ndarray:
    """Concatenate per-kind embeddings in canonical kind order (SDP, DDP, FP)."""
    if not parts:
        raise ValueError("cannot fuse an empty part list")
    kinds = [k for k, _ in parts]
    if len(set(kinds)) != len(kinds):
        raise ValueError("duplicate prompt kind in fusion")
    ordered = sorted(parts, key=lambda p: p[0].order)
    return np.concatenate([np.asarray(v, dtype=np.float64) for _, v in ordered])


def cache_key(dataset_name: str, split: str, series_index: int, kind: PromptKind,
              model_name: str, cfg: RenderConfig, extra: str = "") -> str:
    """Stable content key; any field change changes the key.

    ``extra`` carries kind-specific inputs that alter the prompt text,
    e.g. the feature list for FP prompts.
    """
    for field_name, value in (("dataset_name", dataset_name), ("split", split),
                              ("model_name", model_name)):
        if not value:
            raise ValueError(f"cache_key field {field_name} must be nonempty")
    payload = "\x1f".join([
        dataset_name, split, str(int(series_index)), kind.value, model_name,
        str(cfg.precision), repr(cfg.value_separator), extra,
    ])
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class EmbeddingCache:
    """Content-addressed on-disk vector store with atomic writes."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.vec"

    def get(self, key: str) -> np.ndarray | None:
        path = self._path(key)
        try:
            blob = path.read_bytes()
        except FileNotFoundError:
            with self._lock:
                self.misses += 1
            return None
        (dim,) = struct.unpack("<I", blob[:4])
        vec = np.frombuffer(blob[4:], dtype="<f8", count=dim).copy()
        with self._lock:
            self.hits += 1
        return vec

    def put(self, key: str, vector: np.ndarray) -> None:
        vec = np.ascontiguousarray(np.asarray(vector, dtype=np.float64), dtype="<f8")
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        blob = struct.pack("<I", vec.size) + vec.tobytes()
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(blob)
            os.replace(tmp, path)  # atomic; concurrent writers of one key are idempotent
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @property
    def stats(self) -> dict:
        with self._lock:
            total = self.hits + self.misses
            return {
                "hits": self.hits,
                "misses": self.misses,
                "hit_rate": self.hits / total if total else 0.0,
            }


def build_prompts(values, kind: PromptKind, cfg: RenderConfig, budget: int,
                  counter, feature_names: tuple[str, ...] | None = None):
    """Dispatch to the kind's builder (FP extracts features first)."""
    if kind is PromptKind.SDP:
        return build_sdp(values, cfg, budget, counter)
    if kind is PromptKind.DDP:
        return build_ddp(values, cfg, budget, counter)
    feats = extract_features(values, feature_names)
    return build_fp(feats, cfg, budget, counter)


def embed_series(
    backend: EmbeddingBackend,
    values,
    kind: PromptKind,
    cfg: RenderConfig,
    pooling: str = "mean",
    cache: EmbeddingCache | None = None,
    key: str | None = None,
    feature_names: tuple[str, ...] | None = None,
) -> np.ndarray:
    """Prompt-build, embed and pool one series into a single vector."""
    if cache is not None and key is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit
    subprompts = build_prompts(values, kind, cfg, backend.info.max_tokens,
                               backend.count_tokens, feature_names)
    embeddings = backend.embed_texts([sp.text for sp in subprompts])
    vec = POOLERS[pooling](embeddings)
    if cache is not None and key is not None:
        cache.put(key, vec)
    return vec
