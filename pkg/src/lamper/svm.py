"""From-scratch support vector machine with an RBF kernel.

Binary machines are trained by the SMO kernels in ``_kernels``;
multi-class problems use one-vs-one voting over all class pairs with a
single gamma shared across machines.  Models serialize to a small
little-endian binary format for reuse across runs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from ._kernels import rbf_gram, smo_solve
from .errors import LamperError

MODEL_MAGIC = b"LSVM1"


@dataclass(frozen=True)
class SvmConfig:
    """Training knobs; the defaults match the benchmark runs."""

    C: float = 1.0
    gamma: float | str = "scale"
    tolerance: float = 1e-3
    max_passes: int = 10
    max_iterations: int = 1_000_000

    def __post_init__(self):
        if self.C <= 0:
            raise LamperError(f"C must be positive, got {self.C}")
        if isinstance(self.gamma, str):
            if self.gamma != "scale":
                raise LamperError(f"gamma must be a positive number or 'scale', got {self.gamma!r}")
        elif self.gamma <= 0:
            raise LamperError(f"gamma must be positive, got {self.gamma}")
        if self.tolerance <= 0:
            raise LamperError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_passes < 1:
            raise LamperError(f"max_passes must be >= 1, got {self.max_passes}")
        if self.max_iterations < 1:
            raise LamperError(f"max_iterations must be >= 1, got {self.max_iterations}")


def resolve_gamma(gamma: float | str, X: np.ndarray) -> float:
    """Turn 'scale' into 1 / (n_features * var(X)); pass numbers through."""
    if not isinstance(gamma, str):
        g = float(gamma)
        if g <= 0:
            raise LamperError(f"gamma must be positive, got {g}")
        return g
    if gamma != "scale":
        raise LamperError(f"unknown gamma policy {gamma!r}")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise LamperError("gamma='scale' needs a 2-D feature matrix")
    var = float(X.var())
    if var <= 0.0:
        return 1.0 / X.shape[1]
    return 1.0 / (X.shape[1] * var)


@dataclass
class BinarySvm:
    """A trained two-class machine.  dual_coefs holds alpha_i * y_i."""

    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    gamma: float
    converged: bool = True

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.support_vectors.shape[0] == 0:
            return np.full(X.shape[0], self.bias)
        K = rbf_gram(X, self.gamma, self.support_vectors)
        return K @ self.dual_coefs + self.bias


def train_binary_smo(X: np.ndarray, y: np.ndarray, config: SvmConfig | None = None,
                     gamma: float | None = None, force: str | None = None) -> BinarySvm:
    """Train one machine on labels in {-1, +1}; both classes must appear."""
    config = config or SvmConfig()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise LamperError(f"X must be 2-D, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise LamperError(f"y shape {y.shape} does not match {X.shape[0]} samples")
    labels = set(np.unique(y).tolist())
    if not labels <= {-1.0, 1.0}:
        raise LamperError(f"binary labels must be -1/+1, got {sorted(labels)}")
    if len(labels) < 2:
        raise LamperError("training data must contain both classes")
    g = resolve_gamma(config.gamma, X) if gamma is None else float(gamma)
    alpha, bias, _updates, converged = smo_solve(
        X, y, config.C, g, config.tolerance, config.max_passes,
        config.max_iterations, force=force)
    mask = alpha > 0.0
    return BinarySvm(
        support_vectors=X[mask].copy(),
        dual_coefs=(alpha * y)[mask].copy(),
        bias=bias,
        gamma=g,
        converged=converged,
    )


@dataclass
class SvmModel:
    """One-vs-one multi-class model over sorted integer class ids."""

    classes: tuple[int, ...]
    gamma: float
    machines: list[tuple[int, int, BinarySvm]] = field(default_factory=list)


def train_multiclass(X: np.ndarray, labels: np.ndarray, config: SvmConfig | None = None,
                     force: str | None = None) -> SvmModel:
    """Train machines for every class pair (a, b) with a < b; a maps to +1."""
    config = config or SvmConfig()
    X = np.ascontiguousarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    if X.ndim != 2:
        raise LamperError(f"X must be 2-D, got shape {X.shape}")
    if labels.shape != (X.shape[0],):
        raise LamperError(f"labels shape {labels.shape} does not match {X.shape[0]} samples")
    classes = sorted(int(c) for c in np.unique(labels))
    if len(classes) < 2:
        raise LamperError("training data must contain at least two classes")
    gamma = resolve_gamma(config.gamma, X)
    model = SvmModel(classes=tuple(classes), gamma=gamma)
    for i, a in enumerate(classes):
        for b in classes[i + 1:]:
            sel = (labels == a) | (labels == b)
            sub_y = np.where(labels[sel] == a, 1.0, -1.0)
            machine = train_binary_smo(X[sel], sub_y, config, gamma=gamma, force=force)
            model.machines.append((a, b, machine))
    return model


def predict(model: SvmModel, X: np.ndarray) -> np.ndarray:
    """One-vs-one vote; ties go to the smallest class id."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    index = {c: i for i, c in enumerate(model.classes)}
    votes = np.zeros((X.shape[0], len(model.classes)), dtype=np.int64)
    for a, b, machine in model.machines:
        f = machine.decision(X)
        votes[f >= 0.0, index[a]] += 1
        votes[f < 0.0, index[b]] += 1
    winners = np.argmax(votes, axis=1)
    cls = np.asarray(model.classes, dtype=np.int64)
    return cls[winners]


def evaluate(model: SvmModel, X: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of samples predicted correctly."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise LamperError("cannot evaluate on an empty test set")
    pred = predict(model, X)
    return float(np.mean(pred == labels))


def save_model(model: SvmModel, path) -> None:
    """Write the little-endian binary model file."""
    chunks = [MODEL_MAGIC]
    chunks.append(struct.pack("<I", len(model.classes)))
    chunks.append(np.asarray(model.classes, dtype="<i8").tobytes())
    chunks.append(struct.pack("<d", model.gamma))
    chunks.append(struct.pack("<I", len(model.machines)))
    index = {c: i for i, c in enumerate(model.classes)}
    for a, b, machine in model.machines:
        sv = np.ascontiguousarray(machine.support_vectors, dtype="<f8")
        n_sv, dim = sv.shape
        chunks.append(struct.pack("<IIdBII", index[a], index[b], machine.bias,
                                  1 if machine.converged else 0, n_sv, dim))
        chunks.append(np.ascontiguousarray(machine.dual_coefs, dtype="<f8").tobytes())
        chunks.append(sv.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_model(path) -> SvmModel:
    """Read a model written by save_model."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise LamperError(f"{path}: not a model file (bad magic)")
    off = len(MODEL_MAGIC)

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        vals = struct.unpack_from(fmt, blob, off)
        off += size
        return vals

    (n_classes,) = take("<I")
    classes = np.frombuffer(blob, dtype="<i8", count=n_classes, offset=off)
    off += n_classes * 8
    (gamma,) = take("<d")
    (n_machines,) = take("<I")
    model = SvmModel(classes=tuple(int(c) for c in classes), gamma=float(gamma))
    for _ in range(n_machines):
        ia, ib, bias, conv, n_sv, dim = take("<IIdBII")
        dual = np.frombuffer(blob, dtype="<f8", count=n_sv, offset=off).copy()
        off += n_sv * 8
        sv = np.frombuffer(blob, dtype="<f8", count=n_sv * dim, offset=off).copy()
        off += n_sv * dim * 8
        machine = BinarySvm(
            support_vectors=sv.reshape(n_sv, dim),
            dual_coefs=dual,
            bias=float(bias),
            gamma=float(gamma),
            converged=bool(conv),
        )
        model.machines.append((model.classes[ia], model.classes[ib], machine))
    if off != len(blob):
        raise LamperError(f"{path}: trailing bytes in model file")
    return model
