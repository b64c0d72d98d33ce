"""Rank aggregation, Friedman/Nemenyi statistics, and the CD diagram.

Operates on an accuracy matrix of shape (methods x datasets).  Datasets
with any skipped cell are dropped before ranking, since rank vectors
need every method present.  Rank 1 is the highest accuracy; ties share
the mean of their positions.

The Nemenyi critical difference is CD = q_alpha * sqrt(k(k+1)/(6N)).
The q constants are embedded for alpha = 0.05 and k = 2..20 (values of
the studentized range quantile at infinite degrees of freedom divided
by sqrt(2)); other levels are rejected rather than approximated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .errors import LamperError

# studentized_range.ppf(0.95, k, inf) / sqrt(2), frozen after checking
# against an independent computation
Q_ALPHA_05 = {
    2: 1.959964,
    3: 2.343701,
    4: 2.569032,
    5: 2.727774,
    6: 2.849705,
    7: 2.948320,
    8: 3.030878,
    9: 3.101730,
    10: 3.163684,
    11: 3.218654,
    12: 3.268004,
    13: 3.312739,
    14: 3.353618,
    15: 3.391230,
    16: 3.426041,
    17: 3.458425,
    18: 3.488685,
    19: 3.517073,
    20: 3.543799,
}


@dataclass(frozen=True)
class AccuracyMatrix:
    """methods x datasets accuracies; mask marks skipped cells (True = skipped)."""

    methods: tuple[str, ...]
    datasets: tuple[str, ...]
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        methods = tuple(self.methods)
        datasets = tuple(self.datasets)
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "datasets", datasets)
        if len(methods) < 2:
            raise LamperError(f"need at least 2 methods, got {len(methods)}")
        if len(datasets) < 1:
            raise LamperError("need at least 1 dataset")
        if len(set(methods)) != len(methods):
            raise LamperError("method names must be unique")
        if len(set(datasets)) != len(datasets):
            raise LamperError("dataset names must be unique")
        values = np.asarray(self.values, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        shape = (len(methods), len(datasets))
        if values.shape != shape:
            raise LamperError(f"values shape {values.shape} != {shape}")
        if mask.shape != shape:
            raise LamperError(f"mask shape {mask.shape} != {shape}")
        live = values[~mask]
        if live.size and (not np.all(np.isfinite(live))
                          or live.min() < 0.0 or live.max() > 1.0):
            raise LamperError("unmasked accuracies must be finite and in [0, 1]")
        values = values.copy()
        mask = mask.copy()
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    def complete_datasets(self) -> np.ndarray:
        """Boolean selector over datasets with no skipped cell."""
        return ~self.mask.any(axis=0)

    def skipped_datasets(self) -> tuple[str, ...]:
        keep = self.complete_datasets()
        return tuple(d for d, ok in zip(self.datasets, keep) if not ok)


def rank_column(accuracies: np.ndarray) -> np.ndarray:
    """Ranks for one dataset: 1 = highest accuracy, ties averaged."""
    col = np.asarray(accuracies, dtype=np.float64)
    n = col.shape[0]
    order = np.argsort(-col, kind="stable")
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and col[order[j + 1]] == col[order[i]]:
            j += 1
        # positions are 1-based: slots i+1 .. j+1 share their mean
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def average_ranks(matrix: AccuracyMatrix) -> tuple[np.ndarray, int]:
    """Per-method mean rank over complete datasets; also returns that count."""
    keep = matrix.complete_datasets()
    n_complete = int(keep.sum())
    if n_complete == 0:
        raise LamperError("no complete datasets left after dropping skipped cells")
    cols = matrix.values[:, keep]
    total = np.zeros(len(matrix.methods))
    for j in range(n_complete):
        total += rank_column(cols[:, j])
    return total / n_complete, n_complete


def friedman_statistic(avg_ranks: np.ndarray, k: int, N: int) -> float:
    """Friedman chi-square over per-method average ranks."""
    avg_ranks = np.asarray(avg_ranks, dtype=np.float64)
    if k < 2:
        raise LamperError(f"need k >= 2 methods, got {k}")
    if N < 1:
        raise LamperError(f"need N >= 1 datasets, got {N}")
    if avg_ranks.shape != (k,):
        raise LamperError(f"expected {k} average ranks, got shape {avg_ranks.shape}")
    return float(12.0 * N / (k * (k + 1.0))
                 * (np.sum(avg_ranks ** 2) - k * (k + 1.0) ** 2 / 4.0))


def nemenyi_cd(k: int, N: int, alpha: float = 0.05) -> float:
    """Critical difference q_alpha * sqrt(k(k+1)/(6N)); alpha 0.05 only."""
    if alpha != 0.05:
        raise LamperError(f"unsupported confidence level alpha={alpha}; only 0.05 is tabulated")
    if k not in Q_ALPHA_05:
        raise LamperError(f"k={k} outside the tabulated range 2..20")
    if N < 1:
        raise LamperError(f"need N >= 1 datasets, got {N}")
    return Q_ALPHA_05[k] * math.sqrt(k * (k + 1.0) / (6.0 * N))


def cd_cliques(avg_ranks: np.ndarray, cd: float) -> list[tuple[int, ...]]:
    """Maximal contiguous rank-order groups with spread < cd.

    Returns tuples of method indices ordered by rank; every method is in
    at least one group, and groups contained in a larger one are pruned.
    """
    avg_ranks = np.asarray(avg_ranks, dtype=np.float64)
    if cd <= 0:
        raise LamperError(f"cd must be positive, got {cd}")
    k = avg_ranks.shape[0]
    order = np.argsort(avg_ranks, kind="stable")
    r = avg_ranks[order]
    spans = []
    for i in range(k):
        j = i
        while j + 1 < k and r[j + 1] - r[i] < cd:
            j += 1
        spans.append((i, j))
    kept = [
        (i, j) for (i, j) in spans
        if not any((a <= i and j <= b and (a, b) != (i, j)) for a, b in spans)
    ]
    return [tuple(int(order[t]) for t in range(i, j + 1)) for i, j in kept]


@dataclass(frozen=True)
class RankReport:
    """Aggregated statistics for one configured method set."""

    methods: tuple[str, ...]
    average_accuracy: tuple[float, ...]
    average_rank: tuple[float, ...]
    n_datasets_ranked: int
    skipped: tuple[str, ...]
    friedman: float
    cd: float
    cliques: tuple[tuple[int, ...], ...]
    alpha: float = 0.05


def compute_report(matrix: AccuracyMatrix, alpha: float = 0.05) -> RankReport:
    """Ranks over complete datasets, accuracy means over unmasked cells."""
    ranks, n_complete = average_ranks(matrix)
    k = len(matrix.methods)
    with np.errstate(invalid="ignore"):
        sums = np.where(matrix.mask, 0.0, matrix.values).sum(axis=1)
        counts = (~matrix.mask).sum(axis=1)
        acc = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    cd = nemenyi_cd(k, n_complete, alpha)
    return RankReport(
        methods=matrix.methods,
        average_accuracy=tuple(float(a) for a in acc),
        average_rank=tuple(float(r) for r in ranks),
        n_datasets_ranked=n_complete,
        skipped=matrix.skipped_datasets(),
        friedman=friedman_statistic(ranks, k, n_complete),
        cd=cd,
        cliques=tuple(cd_cliques(ranks, cd)),
        alpha=alpha,
    )


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def render_cd_diagram(report: RankReport) -> str:
    """Deterministic SVG: rank axis, method ticks, CD scale bar, clique lines."""
    k = len(report.methods)
    x0, x1 = 160.0, 560.0
    unit = (x1 - x0) / (k - 1)

    def xpos(rank: float) -> float:
        return x0 + (rank - 1.0) * unit

    axis_y = 60.0
    order = sorted(range(k), key=lambda i: (report.average_rank[i], i))
    drawn = [c for c in report.cliques if len(c) >= 2]
    clique_y0 = axis_y + 12.0
    label_y0 = clique_y0 + 14.0 * len(drawn) + 18.0
    n_left = (k + 1) // 2
    rows = max(n_left, k - n_left)
    height = label_y0 + 16.0 * rows + 20.0

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="720" height="{_fmt(height)}" '
        f'font-family="monospace" font-size="11">',
        f'<line x1="{_fmt(x0)}" y1="{_fmt(axis_y)}" x2="{_fmt(x1)}" y2="{_fmt(axis_y)}" '
        'stroke="black" stroke-width="1"/>',
    ]
    for t in range(1, k + 1):
        x = xpos(float(t))
        parts.append(f'<line x1="{_fmt(x)}" y1="{_fmt(axis_y - 4)}" x2="{_fmt(x)}" '
                     f'y2="{_fmt(axis_y)}" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{_fmt(x)}" y="{_fmt(axis_y - 8)}" '
                     f'text-anchor="middle">{t}</text>')
    # CD scale bar, clamped to the axis span
    bar_end = min(x0 + report.cd * unit, x1)
    parts.append(f'<line x1="{_fmt(x0)}" y1="24.00" x2="{_fmt(bar_end)}" y2="24.00" '
                 'stroke="black" stroke-width="2"/>')
    parts.append(f'<text x="{_fmt(x0)}" y="18.00">CD = {report.cd:.4f}</text>')
    for row, clique in enumerate(drawn):
        lo = min(report.average_rank[i] for i in clique)
        hi = max(report.average_rank[i] for i in clique)
        y = clique_y0 + 14.0 * row
        parts.append(f'<line class="clique" x1="{_fmt(xpos(lo) - 3)}" y1="{_fmt(y)}" '
                     f'x2="{_fmt(xpos(hi) + 3)}" y2="{_fmt(y)}" '
                     'stroke="black" stroke-width="4"/>')
    for slot, i in enumerate(order):
        rank = report.average_rank[i]
        x = xpos(rank)
        left = slot < n_left
        row = slot if left else slot - n_left
        y = label_y0 + 16.0 * row
        lx = x0 - 12.0 if left else x1 + 12.0
        anchor = "end" if left else "start"
        label = escape(f"{report.methods[i]} ({rank:.2f})")
        parts.append(f'<polyline points="{_fmt(x)},{_fmt(axis_y)} {_fmt(x)},{_fmt(y - 4)} '
                     f'{_fmt(lx)},{_fmt(y - 4)}" fill="none" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{_fmt(lx)}" y="{_fmt(y)}" text-anchor="{anchor}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_summary_csv(path, report: RankReport, method_filter=None) -> None:
    """method,average_accuracy,average_rank rows in declaration order."""
    names = report.methods if method_filter is None else tuple(method_filter)
    lines = ["method,average_accuracy,average_rank"]
    for name in names:
        i = report.methods.index(name)
        lines.append(f"{_csv_field(name)},{report.average_accuracy[i]:.6f},"
                     f"{report.average_rank[i]:.6f}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_per_dataset_csv(path, matrix: AccuracyMatrix) -> None:
    """dataset rows x method columns, blank cells for skips, plus a skipped flag."""
    header = ",".join(["dataset"] + [_csv_field(m) for m in matrix.methods] + ["skipped"])
    lines = [header]
    skipped = []
    for j, name in enumerate(matrix.datasets):
        cells = []
        any_skip = False
        for i in range(len(matrix.methods)):
            if matrix.mask[i, j]:
                cells.append("")
                any_skip = True
            else:
                cells.append(f"{matrix.values[i, j]:.6f}")
        if any_skip:
            skipped.append(name)
        lines.append(",".join([_csv_field(name)] + cells + ["yes" if any_skip else "no"]))
    if skipped:
        lines.append("# skipped datasets: " + ", ".join(skipped))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_per_dataset_csv(path) -> AccuracyMatrix:
    """Parse a per-dataset report back into an AccuracyMatrix."""
    import csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(line for line in fh if not line.startswith("#")))
    if not rows:
        raise LamperError(f"{path}: empty per-dataset file")
    header = rows[0]
    if len(header) < 4 or header[0] != "dataset" or header[-1] != "skipped":
        raise LamperError(f"{path}: expected header dataset,<methods...>,skipped")
    methods = tuple(header[1:-1])
    datasets = []
    values = []
    mask = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise LamperError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        datasets.append(row[0])
        vals = []
        msk = []
        for cell in row[1:-1]:
            if cell == "":
                vals.append(float("nan"))
                msk.append(True)
            else:
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise LamperError(f"{path}:{lineno}: bad accuracy {cell!r}") from None
                msk.append(False)
        flagged = row[-1]
        if flagged not in ("yes", "no"):
            raise LamperError(f"{path}:{lineno}: skipped flag must be yes/no, got {flagged!r}")
        if (flagged == "yes") != any(msk):
            raise LamperError(f"{path}:{lineno}: skipped flag disagrees with blank cells")
        values.append(vals)
        mask.append(msk)
    return AccuracyMatrix(
        methods=methods,
        datasets=tuple(datasets),
        values=np.asarray(values, dtype=np.float64).T,
        mask=np.asarray(mask, dtype=bool).T,
    )


def _csv_field(text: str) -> str:
    if any(c in text for c in ",\"\n"):
        return '"' + text.replace('"', '""') + '"'
    return text
