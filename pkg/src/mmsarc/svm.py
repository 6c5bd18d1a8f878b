"""Linear SVM (L2-regularized hinge loss) trained by dual coordinate descent.

Minimizes ``0.5 * ||w||^2 + C * sum_i max(0, 1 - y_i (w . x_i + b))`` with the
bias folded in as an extra constant-1 feature (so it is regularized too).
Each epoch visits the examples in a fresh seeded permutation and updates one
dual variable at a time; training stops when no dual variable moved by more
than ``tol`` in an epoch, or after ``max_epochs``.

Model file format (text, UTF-8, all floats in ``float.hex`` so the round trip
is exact)::

    mmsarc-svm 1
    C <hex>
    b <hex>
    epochs <int>
    layout <n_blocks>
    <name>\t<offset>\t<dim>          (n_blocks lines)
    w <n_features>
    <hex>                            (n_features lines)
    scale <0|n_features>
    <hex>                            (0 or n_features lines)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .vector import FeatureVector, LayoutMismatch, to_csr

__all__ = [
    "TrainConfig",
    "SvmModel",
    "DegenerateLabels",
    "train",
    "predict",
    "predict_many",
    "primal_objective",
    "dual_objective",
    "save_model",
    "load_model",
]

MAGIC = "mmsarc-svm 1"


class DegenerateLabels(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    C: float = 1.0
    max_epochs: int = 1000
    tol: float = 1e-4
    seed: int = 0
    # extension: divide every feature by its max |value| on the training set
    scale_features: bool = False

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass
class SvmModel:
    w: np.ndarray
    b: float
    C: float
    feature_layout: dict[str, tuple[int, int]]
    scale: np.ndarray | None = None
    epochs: int = 0
    history: list[tuple[float, float]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        n = sum(d for _, d in self.feature_layout.values())
        if self.w.shape != (n,):
            raise ValueError(f"weight vector has shape {self.w.shape}, layout needs ({n},)")
        if not self.C > 0:
            raise ValueError("C must be positive")

    @property
    def n_features(self) -> int:
        return self.w.shape[0]


@dataclass
class _Problem:
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    n_features: int  # including the bias column

    @property
    def n_samples(self) -> int:
        return len(self.indptr) - 1


def _with_bias(X: Sequence[FeatureVector], layout, scale) -> _Problem:
    indptr, indices, data, n = to_csr(X, layout)
    if scale is not None:
        data = data / scale[indices]
    # append the constant-1 bias column to every row
    rows = np.diff(indptr)
    new_ptr = np.concatenate([[0], np.cumsum(rows + 1)]).astype(np.int64)
    new_idx = np.empty(len(indices) + len(rows), dtype=np.int64)
    new_val = np.empty(len(indices) + len(rows))
    for i in range(len(rows)):
        lo, hi = indptr[i], indptr[i + 1]
        nlo = new_ptr[i]
        new_idx[nlo : nlo + hi - lo] = indices[lo:hi]
        new_val[nlo : nlo + hi - lo] = data[lo:hi]
        new_idx[new_ptr[i + 1] - 1] = n
        new_val[new_ptr[i + 1] - 1] = 1.0
    return _Problem(new_ptr, new_idx, new_val, n + 1)


def _margins(prob: _Problem, w: np.ndarray) -> np.ndarray:
    out = np.empty(prob.n_samples)
    kernels.csr_dot(prob.indptr, prob.indices, prob.data, w, out)
    return out


def primal_objective(w_aug: np.ndarray, prob: _Problem, y: np.ndarray, C: float) -> float:
    hinge = np.maximum(0.0, 1.0 - y * _margins(prob, w_aug))
    return float(0.5 * w_aug @ w_aug + C * hinge.sum())


def dual_objective(alpha: np.ndarray, w_aug: np.ndarray) -> float:
    """Dual value ``sum(alpha) - 0.5 ||w(alpha)||^2`` (to be maximized)."""
    return float(alpha.sum() - 0.5 * w_aug @ w_aug)


def _check_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValueError("labels must be +1 or -1")
    if len(np.unique(y)) < 2:
        raise DegenerateLabels("training labels contain a single class")
    return y


def train(
    X: Sequence[FeatureVector],
    y: Sequence[int],
    cfg: TrainConfig = TrainConfig(),
    callback: Callable[[int, np.ndarray, np.ndarray], None] | None = None,
    track_objective: bool = False,
) -> SvmModel:
    """Fit a linear SVM.

    ``callback(epoch, alpha, w_aug)`` is called after every epoch with the
    current dual variables and augmented weights (bias last); handy for
    monitoring feasibility and convergence.  With ``track_objective`` the
    returned model carries ``(primal, dual)`` values per epoch in ``history``.
    """
    if len(X) != len(y):
        raise ValueError(f"{len(X)} vectors but {len(y)} labels")
    if len(X) < 2:
        raise ValueError("need at least two training examples")
    y = _check_labels(y)
    layout = X[0].layout

    scale = None
    if cfg.scale_features:
        indptr, indices, data, n = to_csr(X, layout)
        scale = np.zeros(n)
        np.maximum.at(scale, indices, np.abs(data))
        scale[scale == 0] = 1.0

    prob = _with_bias(X, layout, scale)
    sqnorm = np.add.reduceat(prob.data**2, prob.indptr[:-1])
    alpha = np.zeros(prob.n_samples)
    w = np.zeros(prob.n_features)
    rng = np.random.default_rng(cfg.seed)
    history = []

    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(prob.n_samples).astype(np.int64)
        change = kernels.dcd_epoch(
            prob.indptr, prob.indices, prob.data, y, alpha, w, sqnorm, order, float(cfg.C)
        )
        if track_objective:
            history.append((primal_objective(w, prob, y, cfg.C), dual_objective(alpha, w)))
        if callback is not None:
            callback(epoch, alpha, w)
        if change < cfg.tol:
            break

    return SvmModel(
        w=w[:-1].copy(),
        b=float(w[-1]),
        C=float(cfg.C),
        feature_layout=dict(layout),
        scale=scale,
        epochs=epoch,
        history=history,
    )


def _check_layout(m: SvmModel, x: FeatureVector):
    if x.layout != m.feature_layout:
        raise LayoutMismatch(f"vector layout {x.layout} does not match model {m.feature_layout}")


def predict(m: SvmModel, x: FeatureVector) -> tuple[int, float]:
    """Return ``(label, score)``; a score of exactly 0 is labelled +1."""
    _check_layout(m, x)
    i, v = x.nonzeros()
    if m.scale is not None:
        v = v / m.scale[i]
    score = float(np.dot(m.w[i], v) + m.b)
    return (1 if score >= 0 else -1), score


def predict_many(m: SvmModel, X: Sequence[FeatureVector]) -> tuple[np.ndarray, np.ndarray]:
    if not X:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    for x in X:
        _check_layout(m, x)
    prob = _with_bias(X, m.feature_layout, m.scale)
    scores = _margins(prob, np.append(m.w, m.b))
    return np.where(scores >= 0, 1, -1), scores


# --------------------------------------------------------------------------
# serialization


def save_model(m: SvmModel, path: str | Path) -> None:
    lines = [
        MAGIC,
        f"C {float(m.C).hex()}",
        f"b {float(m.b).hex()}",
        f"epochs {m.epochs}",
        f"layout {len(m.feature_layout)}",
    ]
    for name, (off, dim) in m.feature_layout.items():
        if "\t" in name or "\n" in name:
            raise ValueError(f"block name {name!r} cannot be serialized")
        lines.append(f"{name}\t{off}\t{dim}")
    lines.append(f"w {m.n_features}")
    lines += [float(x).hex() for x in m.w]
    scale = m.scale if m.scale is not None else []
    lines.append(f"scale {len(scale)}")
    lines += [float(x).hex() for x in scale]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> SvmModel:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines[0] != MAGIC:
        raise ValueError(f"{path}: not an mmsarc SVM model (header {lines[0]!r})")
    it = iter(lines[1:])

    def field(key):
        k, _, val = next(it).partition(" ")
        if k != key:
            raise ValueError(f"{path}: expected {key!r}, found {k!r}")
        return val

    C = float.fromhex(field("C"))
    b = float.fromhex(field("b"))
    epochs = int(field("epochs"))
    layout = {}
    for _ in range(int(field("layout"))):
        name, off, dim = next(it).split("\t")
        layout[name] = (int(off), int(dim))
    w = np.array([float.fromhex(next(it)) for _ in range(int(field("w")))])
    n_scale = int(field("scale"))
    scale = np.array([float.fromhex(next(it)) for _ in range(n_scale)]) if n_scale else None
    return SvmModel(w=w, b=b, C=C, feature_layout=layout, scale=scale, epochs=epochs)
