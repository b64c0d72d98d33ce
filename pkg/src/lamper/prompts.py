"""Serialize a series (or its features) into text prompts under a token budget.

Three prompt kinds exist:

* SDP - the raw values, rendered and joined by a separator.
* DDP - a sentence template narrating series length, sub-series count and
  the sub-series values.  The template wording is fixed byte-for-byte,
  including the historical spelling "splited".
* FP  - a sentence template enumerating named feature values.

A series that exceeds the backend budget is sliced into contiguous chunks;
the chunk length is the largest one for which every rendered sub-prompt
fits, found by binary search with exact verification through the backend's
own token counter (never estimated).

Token counters are batch functions: ``counter(list_of_texts) -> counts``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import BudgetError
from .features import FeatureVector

__all__ = [
    "PromptKind",
    "SubPrompt",
    "RenderConfig",
    "TokenCounter",
    "format_value",
    "slice_series",
    "compute_chunk_len",
    "build_sdp",
    "build_ddp",
    "build_fp",
]

TokenCounter = Callable[[Sequence[str]], Sequence[int]]

DDP_TEMPLATE = (
    "The length of time series is {series_len}. The original time series is "
    "splited into {num_chunks} sub-series, whose length is {chunk_len}. The "
    "specific value of the {ordinal} sub-series are {data} in order."
)

FP_HEAD = "{count} features of the time series are extracted via tsfresh, "
FP_CLAUSE = "the feature of {name} is {value}"


class PromptKind(enum.Enum):
    SDP = "SDP"
    DDP = "DDP"
    FP = "FP"

    @property
    def order(self) -> int:
        return _KIND_ORDER[self]

    @classmethod
    def parse(cls, text: str) -> "PromptKind":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ValueError(f"unknown prompt kind {text!r}") from None


_KIND_ORDER = {PromptKind.SDP: 0, PromptKind.DDP: 1, PromptKind.FP: 2}

# canonical kind order used for fusion concatenation and method naming
KIND_ORDER = (PromptKind.SDP, PromptKind.DDP, PromptKind.FP)


@dataclass(frozen=True)
class SubPrompt:
    """One rendered chunk of a serialized series."""

    kind: PromptKind
    index: int
    total: int
    text: str

    def __post_init__(self):
        if not (0 <= self.index < self.total):
            raise ValueError("sub-prompt index out of range")
        if not self.text:
            raise ValueError("empty sub-prompt text")


@dataclass(frozen=True)
class RenderConfig:
    """Numeral rendering rules for prompt text."""

    precision: int = 4
    value_separator: str = ", "

    def __post_init__(self):
        if not (0 <= self.precision <= 12):
            raise ValueError("precision must be in [0, 12]")


def format_value(x: float, cfg: RenderConfig) -> str:
    """Fixed-point rendering with exactly ``cfg.precision`` fractional digits.

    Rounds half to even, never uses exponent notation, and normalizes a
    negative zero result to the positive form.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot render non-finite value {x!r}")
    s = f"{x:.{cfg.precision}f}"
    if s.startswith("-") and float(s) == 0.0:
        s = s[1:]
    return s


def ordinal(n: int) -> str:
    """1 -> '1st', 2 -> '2nd', 3 -> '3rd', 4 -> '4th', 11 -> '11th', ..."""
    if n % 100 in (11, 12, 13):
        suffix = "th"
    else:
        suffix = {1: "st", 2: "nd", 3: "rd"}.get(n % 10, "th")
    return f"{n}{suffix}"


def slice_series(values: Sequence[float], chunk_len: int) -> list[np.ndarray]:
    """Contiguous chunks of ``chunk_len`` values; the last may be shorter."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot slice an empty series")
    if chunk_len < 1:
        raise ValueError("chunk_len must be >= 1")
    return [v[i : i + chunk_len] for i in range(0, v.size, chunk_len)]


def _render_values(chunk: np.ndarray, cfg: RenderConfig) -> str:
    return cfg.value_separator.join(format_value(x, cfg) for x in chunk)


def render_sdp_chunks(values, chunk_len: int, cfg: RenderConfig) -> list[str]:
    return [_render_values(c, cfg) for c in slice_series(values, chunk_len)]


def render_ddp_chunks(values, chunk_len: int, cfg: RenderConfig) -> list[str]:
    chunks = slice_series(values, chunk_len)
    n = int(np.asarray(values).size)
    return [
        DDP_TEMPLATE.format(
            series_len=n,
            num_chunks=len(chunks),
            chunk_len=chunk_len,
            ordinal=ordinal(i + 1),
            data=_render_values(chunk, cfg),
        )
        for i, chunk in enumerate(chunks)
    ]


_RENDERERS = {PromptKind.SDP: render_sdp_chunks, PromptKind.DDP: render_ddp_chunks}


def compute_chunk_len(
    values,
    kind: PromptKind,
    cfg: RenderConfig,
    budget: int,
    counter: TokenCounter,
) -> int:
    """Largest chunk length whose every rendered sub-prompt fits the budget.

    Binary search over [1, len(values)]; each candidate is verified by
    rendering all of its sub-prompts and counting their tokens.
    """
    if kind not in _RENDERERS:
        raise ValueError(f"{kind} prompts are not sliced by chunk length")
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot chunk an empty series")
    render = _RENDERERS[kind]

    def fits(chunk_len: int) -> bool:
        texts = render(v, chunk_len, cfg)
        return all(c <= budget for c in counter(texts))

    if not fits(1):
        raise BudgetError(
            f"{kind.value}: no chunk length fits a budget of {budget} tokens"
        )
    lo, hi = 1, int(v.size)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if fits(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def _to_subprompts(kind: PromptKind, texts: list[str]) -> list[SubPrompt]:
    total = len(texts)
    return [SubPrompt(kind=kind, index=i, total=total, text=t) for i, t in enumerate(texts)]


def build_sdp(
    values,
    cfg: RenderConfig,
    budget: int,
    counter: TokenCounter,
    chunk_len: int | None = None,
) -> list[SubPrompt]:
    """Raw-value sub-prompts; ``chunk_len`` overrides the budget search."""
    if chunk_len is None:
        chunk_len = compute_chunk_len(values, PromptKind.SDP, cfg, budget, counter)
    return _to_subprompts(PromptKind.SDP, render_sdp_chunks(values, chunk_len, cfg))


def build_ddp(
    values,
    cfg: RenderConfig,
    budget: int,
    counter: TokenCounter,
    chunk_len: int | None = None,
) -> list[SubPrompt]:
    """Narrated sub-prompts; ``chunk_len`` overrides the budget search."""
    if chunk_len is None:
        chunk_len = compute_chunk_len(values, PromptKind.DDP, cfg, budget, counter)
    return _to_subprompts(PromptKind.DDP, render_ddp_chunks(values, chunk_len, cfg))


def _render_fp(clauses: list[str]) -> str:
    return FP_HEAD.format(count=len(clauses)) + ", ".join(clauses) + "."


def build_fp(
    features: FeatureVector,
    cfg: RenderConfig,
    budget: int,
    counter: TokenCounter,
) -> list[SubPrompt]:
    """Feature-enumeration sub-prompts.

    Normally a single prompt; when the filled template exceeds the budget the
    clauses are packed greedily into several prompts, each restating the head
    with its own feature count.
    """
    if len(features) == 0:
        raise ValueError("cannot render an empty feature vector")
    clauses = [
        FP_CLAUSE.format(name=name, value=format_value(value, cfg))
        for name, value in features.entries
    ]

    groups: list[list[str]] = []
    current: list[str] = []
    for clause in clauses:
        candidate = _render_fp(current + [clause])
        if counter([candidate])[0] <= budget:
            current.append(clause)
            continue
        if not current:
            raise BudgetError(
                f"FP: single feature clause exceeds the budget of {budget} tokens"
            )
        groups.append(current)
        current = [clause]
        if counter([_render_fp(current)])[0] > budget:
            raise BudgetError(
                f"FP: single feature clause exceeds the budget of {budget} tokens"
            )
    groups.append(current)
    return _to_subprompts(PromptKind.FP, [_render_fp(g) for g in groups])
