"""Summary-statistic features of a series.

The canonical feature set (order matters, the feature prompt and the CSV
output both follow it): sum, median, mean, length, standard_deviation,
variance, root_mean_square, maximum, absolute_maximum, minimum.
Standard deviation and variance are population moments (divide by n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["FeatureVector", "CANONICAL_FEATURES", "extract_features"]


def _rms(v: np.ndarray) -> float:
    return float(np.sqrt(np.mean(v * v)))


# name -> implementation, in canonical order
FEATURE_FUNCS = {
    "sum": lambda v: float(np.sum(v)),
    "median": lambda v: float(np.median(v)),
    "mean": lambda v: float(np.mean(v)),
    "length": lambda v: float(v.size),
    "standard_deviation": lambda v: float(np.std(v)),
    "variance": lambda v: float(np.var(v)),
    "root_mean_square": _rms,
    "maximum": lambda v: float(np.max(v)),
    "absolute_maximum": lambda v: float(np.max(np.abs(v))),
    "minimum": lambda v: float(np.min(v)),
}

CANONICAL_FEATURES = tuple(FEATURE_FUNCS)


@dataclass(frozen=True)
class FeatureVector:
    """Named feature values in a fixed order."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        names = [n for n, _ in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("duplicate feature names")
        if not all(np.isfinite(v) for _, v in self.entries):
            raise ValueError("non-finite feature value")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.entries)

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(v for _, v in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, name: str) -> float:
        for n, v in self.entries:
            if n == name:
                return v
        raise KeyError(name)


def extract_features(values, feature_names: tuple[str, ...] | None = None) -> FeatureVector:
    """Compute the configured features of one series.

    ``feature_names`` defaults to the canonical list; passing a subset (or a
    registered extension) keeps the given order.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("feature extraction needs a nonempty 1-D series")
    if not np.all(np.isfinite(v)):
        raise ValueError("feature extraction needs finite values")
    names = CANONICAL_FEATURES if feature_names is None else tuple(feature_names)
    entries = []
    for name in names:
        try:
            fn = FEATURE_FUNCS[name]
        except KeyError:
            raise ValueError(f"unknown feature {name!r}") from None
        entries.append((name, fn(v)))
    return FeatureVector(entries=tuple(entries))
