"""Archive-format dataset ingestion.

Datasets live on disk as ``<root>/<Name>/<Name>_TRAIN.tsv`` and
``<Name>_TEST.tsv``: one record per line, a class label followed by the
series values, tab- or comma-separated (the separator is detected per file
from the first line and must be consistent within the file).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DatasetError

__all__ = [
    "LabeledSeries",
    "TimeSeriesDataset",
    "parse_ucr_tsv",
    "load_dataset",
    "list_datasets",
    "serialize_series",
]


@dataclass(frozen=True, eq=False)
class LabeledSeries:
    """One univariate series with an integer class label."""

    label: int
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise DatasetError("series values must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise DatasetError("series contains a non-finite value")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "label", int(self.label))


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Named train/test split of labeled series."""

    name: str
    train: tuple[LabeledSeries, ...]
    test: tuple[LabeledSeries, ...]
    class_count: int = field(init=False)

    def __post_init__(self):
        if not self.train or not self.test:
            raise DatasetError(f"{self.name}: train and test must both be nonempty")
        train_labels = {s.label for s in self.train}
        test_labels = {s.label for s in self.test}
        unseen = test_labels - train_labels
        if unseen:
            raise DatasetError(
                f"{self.name}: test labels {sorted(unseen)} never appear in train"
            )
        if len(train_labels) < 2:
            raise DatasetError(f"{self.name}: fewer than 2 classes in train split")
        object.__setattr__(self, "class_count", len(train_labels))

    @property
    def classes(self) -> list[int]:
        return sorted({s.label for s in self.train})

    def equal_length(self) -> bool:
        lengths = {len(s.values) for s in self.train} | {len(s.values) for s in self.test}
        return len(lengths) == 1


def _detect_separator(line: str) -> str:
    if "\t" in line:
        return "\t"
    if "," in line:
        return ","
    # single-field line; parsing below reports the <2 fields error
    return "\t"


def _parse_label(field_text: str, lineno: int) -> int:
    try:
        raw = float(field_text)
    except ValueError:
        raise DatasetError(f"line {lineno}: non-numeric label {field_text!r}") from None
    if not math.isfinite(raw) or raw != int(raw):
        raise DatasetError(f"line {lineno}: label {field_text!r} is not an integer")
    return int(raw)


def parse_ucr_tsv(raw: bytes | str) -> list[LabeledSeries]:
    """Parse one archive split file into labeled series, in file order."""
    text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines()) if ln.strip()]
    if not lines:
        raise DatasetError("empty dataset file")
    sep = _detect_separator(lines[0][1])
    out = []
    for lineno, line in lines:
        fields = [f.strip() for f in line.split(sep)]
        fields = [f for f in fields if f]  # tolerate a trailing separator
        if len(fields) < 2:
            raise DatasetError(f"line {lineno}: expected a label and at least one value")
        label = _parse_label(fields[0], lineno)
        try:
            values = np.array([float(f) for f in fields[1:]], dtype=np.float64)
        except ValueError:
            raise DatasetError(f"line {lineno}: non-numeric value field") from None
        if not np.all(np.isfinite(values)):
            raise DatasetError(f"line {lineno}: non-finite value (missing data is rejected)")
        out.append(LabeledSeries(label=label, values=values))
    return out


def _z_normalize(series: LabeledSeries) -> LabeledSeries:
    v = series.values
    std = float(np.std(v))
    if std == 0.0:
        return LabeledSeries(label=series.label, values=np.zeros_like(v))
    return LabeledSeries(label=series.label, values=(v - np.mean(v)) / std)


def split_paths(root: Path | str, name: str) -> tuple[Path, Path]:
    base = Path(root) / name
    return base / f"{name}_TRAIN.tsv", base / f"{name}_TEST.tsv"


def load_dataset(root: Path | str, name: str, z_normalize: bool = False) -> TimeSeriesDataset:
    """Load both splits of a named dataset and check its invariants."""
    train_path, test_path = split_paths(root, name)
    splits = []
    for path in (train_path, test_path):
        if not path.is_file():
            raise DatasetError(f"{name}: missing split file {path}")
        try:
            series = parse_ucr_tsv(path.read_bytes())
        except DatasetError as exc:
            raise DatasetError(f"{path.name}: {exc}") from None
        if z_normalize:
            series = [_z_normalize(s) for s in series]
        splits.append(tuple(series))
    return TimeSeriesDataset(name=name, train=splits[0], test=splits[1])


def list_datasets(root: Path | str) -> list[str]:
    """Names of subdirectories holding both split files, sorted."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a readable directory")
    names = []
    for child in root.iterdir():
        if not child.is_dir():
            continue
        train_path, test_path = split_paths(root, child.name)
        if train_path.is_file() and test_path.is_file():
            names.append(child.name)
    return sorted(names)


def synthetic_root() -> Path:
    """Root of the three bundled synthetic datasets."""
    return Path(__file__).parent / "data" / "synthetic"


def serialize_series(series: LabeledSeries, sep: str = "\t") -> str:
    """Render a series back to an archive line.

    Values use shortest round-trip decimal rendering, so parsing the line
    again reproduces the exact same doubles.
    """
    return sep.join([str(series.label)] + [repr(float(v)) for v in series.values])
