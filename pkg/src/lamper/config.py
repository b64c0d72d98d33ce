"""Run configuration: file format, validation, method-set derivation.

The file format is flat ``key = value`` text in UTF-8 with ``[section]``
headers and full-line ``#`` comments.  Sections are [run], [backend],
[render], and [svm].  Unknown sections or keys are rejected with the
offending line number, as are invalid values and violated invariants.

Relative paths are resolved against the directory containing the config
file, so shipped configs work from any working directory.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .features import CANONICAL_FEATURES, FEATURE_FUNCS
from .prompts import KIND_ORDER, PromptKind
from .svm import SvmConfig

_SECTIONS = {
    "run": {
        "dataset_root", "dataset_filter", "prompt_kinds", "fusion_sets",
        "include_ts_benchmark", "normalize_embeddings", "output_dir",
        "cache_dir", "concurrency",
    },
    "backend": {"backend", "endpoint", "mock.dimension", "mock.seed", "mock.max_tokens"},
    "render": {"precision", "features"},
    "svm": {"c", "gamma", "tolerance", "max_passes", "max_iterations"},
}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


@dataclass(frozen=True)
class MethodSpec:
    """One column of the benchmark: a prompt kind, a fusion, or raw series."""

    name: str
    source: str  # "single" | "fusion" | "ts"
    kinds: tuple[PromptKind, ...] = ()

    def __post_init__(self):
        if self.source not in ("single", "fusion", "ts"):
            raise ConfigError(f"bad method source {self.source!r}")
        if self.source == "single" and len(self.kinds) != 1:
            raise ConfigError("single methods take exactly one prompt kind")
        if self.source == "fusion" and len(self.kinds) < 2:
            raise ConfigError("fusion methods take at least two prompt kinds")
        if self.source == "ts" and self.kinds:
            raise ConfigError("the raw-series method takes no prompt kinds")


@dataclass(frozen=True)
class RunConfig:
    """Validated knobs for one benchmark run."""

    dataset_root: str
    output_dir: str
    cache_dir: str
    dataset_filter: tuple[str, ...] | None = None
    prompt_kinds: tuple[PromptKind, ...] = (PromptKind.SDP, PromptKind.DDP, PromptKind.FP)
    fusion_sets: tuple[tuple[PromptKind, ...], ...] = ()
    include_ts_benchmark: bool = False
    normalize_embeddings: bool = False
    concurrency: int = 4
    backend: str = "mock"
    endpoint: str | None = None
    mock_dimension: int = 32
    mock_seed: int = 0
    mock_max_tokens: int = 512
    precision: int = 4
    features: tuple[str, ...] = CANONICAL_FEATURES
    svm: SvmConfig = field(default_factory=SvmConfig)

    def needed_kinds(self) -> tuple[PromptKind, ...]:
        """Prompt kinds to embed: declared singles plus all fusion members."""
        wanted = set(self.prompt_kinds)
        for fset in self.fusion_sets:
            wanted.update(fset)
        return tuple(k for k in KIND_ORDER if k in wanted)

    def method_specs(self) -> tuple[MethodSpec, ...]:
        """Benchmark columns in report order: singles, fusions, then TS.

        Singles and fusion members are put in canonical kind order here, so
        the naming contract holds even for hand-built configs.
        """
        specs = [MethodSpec(k.value, "single", (k,))
                 for k in KIND_ORDER if k in self.prompt_kinds]
        for fset in self.fusion_sets:
            kinds = tuple(k for k in KIND_ORDER if k in fset)
            if set(kinds) == set(KIND_ORDER):
                name = "Fusion"
            else:
                name = "+".join(k.value for k in kinds)
            specs.append(MethodSpec(name, "fusion", kinds))
        if self.include_ts_benchmark:
            specs.append(MethodSpec("TS", "ts"))
        return tuple(specs)


def _parse_lines(text: str):
    """Yield (lineno, section, key, value) after comment/blank stripping."""
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if key not in _SECTIONS[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        yield lineno, section, key, value


def _to_bool(value: str, lineno: int, key: str) -> bool:
    low = value.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ConfigError(f"line {lineno}: {key} must be true/false, got {value!r}")


def _to_int(value: str, lineno: int, key: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} must be an integer, got {value!r}") from None


def _to_float(value: str, lineno: int, key: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"line {lineno}: {key} must be a number, got {value!r}") from None


def _to_kind(token: str, lineno: int) -> PromptKind:
    try:
        return PromptKind.parse(token)
    except Exception:
        raise ConfigError(f"line {lineno}: unknown prompt kind {token!r} "
                          "(expected sdp, ddp, or fp)") from None


def _split_list(value: str) -> list[str]:
    return [t.strip() for t in value.split(",") if t.strip()]


def validate_config(text: str, base_dir: str = ".") -> RunConfig:
    """Parse, default, and invariant-check a config document."""
    seen: dict[tuple[str, str], int] = {}
    raw: dict[tuple[str, str], tuple[str, int]] = {}
    for lineno, section, key, value in _parse_lines(text):
        slot = (section, key)
        if slot in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in [{section}] "
                              f"(first set on line {seen[slot]})")
        seen[slot] = lineno
        raw[slot] = (value, lineno)

    def pop(section: str, key: str):
        return raw.pop((section, key), (None, 0))

    def resolve(path: str) -> str:
        return os.path.normpath(os.path.join(base_dir, path))

    val, ln = pop("run", "dataset_root")
    if val is None:
        raise ConfigError("missing required key dataset_root in [run]")
    if not val:
        raise ConfigError(f"line {ln}: dataset_root must not be empty")
    dataset_root = resolve(val)

    val, ln = pop("run", "output_dir")
    output_dir = resolve(val) if val else resolve("lamper-out")

    val, ln = pop("run", "cache_dir")
    cache_dir = resolve(val) if val else os.path.join(output_dir, "cache")

    val, ln = pop("run", "dataset_filter")
    dataset_filter = tuple(_split_list(val)) if val else None

    val, ln = pop("run", "prompt_kinds")
    if val is None:
        prompt_kinds = (PromptKind.SDP, PromptKind.DDP, PromptKind.FP)
    else:
        tokens = _split_list(val)
        kinds = [_to_kind(t, ln) for t in tokens]
        if len(set(kinds)) != len(kinds):
            raise ConfigError(f"line {ln}: duplicate prompt kinds")
        prompt_kinds = tuple(k for k in KIND_ORDER if k in kinds)

    val, ln = pop("run", "fusion_sets")
    fusion_sets: tuple[tuple[PromptKind, ...], ...] = ()
    if val:
        sets = []
        for group in _split_list(val):
            kinds = [_to_kind(t, ln) for t in group.split("+") if t.strip()]
            if len(kinds) < 2:
                raise ConfigError(f"line {ln}: fusion set {group!r} needs at least two kinds")
            if len(set(kinds)) != len(kinds):
                raise ConfigError(f"line {ln}: fusion set {group!r} repeats a kind")
            sets.append(tuple(k for k in KIND_ORDER if k in kinds))
        if len(set(sets)) != len(sets):
            raise ConfigError(f"line {ln}: duplicate fusion sets after normalization")
        fusion_sets = tuple(sets)

    val, ln = pop("run", "include_ts_benchmark")
    include_ts = _to_bool(val, ln, "include_ts_benchmark") if val is not None else False

    val, ln = pop("run", "normalize_embeddings")
    normalize = _to_bool(val, ln, "normalize_embeddings") if val is not None else False

    val, ln = pop("run", "concurrency")
    concurrency = _to_int(val, ln, "concurrency") if val is not None else 4
    if concurrency < 1:
        raise ConfigError(f"line {ln}: concurrency must be >= 1, got {concurrency}")

    val, ln = pop("backend", "backend")
    backend = (val or "mock").lower()
    if backend not in ("mock", "http"):
        raise ConfigError(f"line {ln}: backend must be mock or http, got {val!r}")

    val, ln = pop("backend", "endpoint")
    endpoint = val
    if backend == "http" and not endpoint:
        raise ConfigError("backend http requires an endpoint key in [backend]")
    if backend == "mock" and endpoint:
        raise ConfigError(f"line {ln}: endpoint is only valid with backend = http")

    val, ln = pop("backend", "mock.dimension")
    mock_dimension = _to_int(val, ln, "mock.dimension") if val is not None else 32
    if val is not None and backend != "mock":
        raise ConfigError(f"line {ln}: mock.dimension is only valid with backend = mock")
    if mock_dimension < 1:
        raise ConfigError(f"line {ln}: mock.dimension must be >= 1, got {mock_dimension}")

    val, ln = pop("backend", "mock.seed")
    mock_seed = _to_int(val, ln, "mock.seed") if val is not None else 0
    if val is not None and backend != "mock":
        raise ConfigError(f"line {ln}: mock.seed is only valid with backend = mock")

    val, ln = pop("backend", "mock.max_tokens")
    mock_max_tokens = _to_int(val, ln, "mock.max_tokens") if val is not None else 512
    if val is not None and backend != "mock":
        raise ConfigError(f"line {ln}: mock.max_tokens is only valid with backend = mock")
    if mock_max_tokens < 8:
        raise ConfigError(f"line {ln}: mock.max_tokens must be >= 8, got {mock_max_tokens}")

    val, ln = pop("render", "precision")
    precision = _to_int(val, ln, "precision") if val is not None else 4
    if not 0 <= precision <= 12:
        raise ConfigError(f"line {ln}: precision must be in 0..12, got {precision}")

    val, ln = pop("render", "features")
    if val is None:
        features = CANONICAL_FEATURES
    else:
        names = _split_list(val)
        if not names:
            raise ConfigError(f"line {ln}: features list must not be empty")
        for name in names:
            if name not in FEATURE_FUNCS:
                raise ConfigError(f"line {ln}: unknown feature {name!r}")
        if len(set(names)) != len(names):
            raise ConfigError(f"line {ln}: duplicate feature names")
        features = tuple(names)

    val, ln = pop("svm", "c")
    C = _to_float(val, ln, "C") if val is not None else 1.0
    val, ln = pop("svm", "gamma")
    if val is None:
        gamma: float | str = "scale"
    elif val.lower() == "scale":
        gamma = "scale"
    else:
        gamma = _to_float(val, ln, "gamma")
    val, ln = pop("svm", "tolerance")
    tolerance = _to_float(val, ln, "tolerance") if val is not None else 1e-3
    val, ln = pop("svm", "max_passes")
    max_passes = _to_int(val, ln, "max_passes") if val is not None else 10
    val, ln = pop("svm", "max_iterations")
    max_iterations = _to_int(val, ln, "max_iterations") if val is not None else 1_000_000
    try:
        svm = SvmConfig(C=C, gamma=gamma, tolerance=tolerance,
                        max_passes=max_passes, max_iterations=max_iterations)
    except Exception as exc:
        raise ConfigError(f"invalid [svm] settings: {exc}") from None

    assert not raw, f"unconsumed config keys: {sorted(raw)}"

    cfg = RunConfig(
        dataset_root=dataset_root,
        output_dir=output_dir,
        cache_dir=cache_dir,
        dataset_filter=dataset_filter,
        prompt_kinds=prompt_kinds,
        fusion_sets=fusion_sets,
        include_ts_benchmark=include_ts,
        normalize_embeddings=normalize,
        concurrency=concurrency,
        backend=backend,
        endpoint=endpoint,
        mock_dimension=mock_dimension,
        mock_seed=mock_seed,
        mock_max_tokens=mock_max_tokens,
        precision=precision,
        features=features,
        svm=svm,
    )
    if not cfg.needed_kinds() and not cfg.include_ts_benchmark:
        raise ConfigError("nothing to run: no prompt kinds, no fusion sets, "
                          "and the raw-series benchmark is disabled")
    return cfg


def load_config(path) -> RunConfig:
    """Read and validate a config file; relative paths resolve beside it."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return validate_config(text, base_dir=os.path.dirname(os.path.abspath(path)))
