"""Block feature vectors and concatenation fusion.

A :class:`FeatureVector` is an ordered list of named blocks.  A block is
either dense (a float array) or sparse (sorted indices into a vocabulary of
known size, with values; one-hot blocks use 1.0 everywhere).  Concatenating
vectors stacks their blocks and records where each one starts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = ["Block", "FeatureVector", "concat", "LayoutMismatch", "DuplicateBlockError", "to_csr"]


class DuplicateBlockError(ValueError):
    pass


class LayoutMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Block:
    name: str
    dim: int
    dense: np.ndarray | None = None
    indices: np.ndarray | None = None
    values: np.ndarray | None = None

    def __post_init__(self):
        if (self.dense is None) == (self.indices is None):
            raise ValueError("a block is either dense or sparse")
        if self.dense is not None and self.dense.shape != (self.dim,):
            raise ValueError(f"block {self.name!r}: dense shape {self.dense.shape} != ({self.dim},)")
        if self.indices is not None:
            if len(self.indices) and (self.indices[0] < 0 or self.indices[-1] >= self.dim):
                raise ValueError(f"block {self.name!r}: index out of range for dim {self.dim}")
            if np.any(np.diff(self.indices) <= 0):
                raise ValueError(f"block {self.name!r}: indices must be strictly increasing")

    @classmethod
    def from_dense(cls, name: str, values: Sequence[float]) -> "Block":
        arr = np.asarray(values, dtype=np.float64).copy()
        return cls(name, arr.shape[0], dense=arr)

    @classmethod
    def onehot(cls, name: str, dim: int, indices: Iterable[int]) -> "Block":
        idx = np.array(sorted(set(int(i) for i in indices)), dtype=np.int64)
        return cls(name, dim, indices=idx, values=np.ones(len(idx)))

    @property
    def is_sparse(self) -> bool:
        return self.indices is not None

    def nonzeros(self) -> tuple[np.ndarray, np.ndarray]:
        if self.is_sparse:
            return self.indices, self.values
        nz = np.flatnonzero(self.dense)
        return nz, self.dense[nz]

    def to_dense(self) -> np.ndarray:
        if not self.is_sparse:
            return self.dense.copy()
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def index_set(self) -> set[int]:
        return set(self.indices.tolist()) if self.is_sparse else set(np.flatnonzero(self.dense).tolist())


@dataclass(frozen=True, eq=False)
class FeatureVector:
    blocks: tuple[Block, ...]

    def __post_init__(self):
        names = [b.name for b in self.blocks]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise DuplicateBlockError(f"duplicate block names: {dup}")

    @classmethod
    def of(cls, *blocks: Block) -> "FeatureVector":
        return cls(tuple(blocks))

    @property
    def total_dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    @property
    def layout(self) -> dict[str, tuple[int, int]]:
        out, off = {}, 0
        for b in self.blocks:
            out[b.name] = (off, b.dim)
            off += b.dim
        return out

    def __getitem__(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def nonzeros(self) -> tuple[np.ndarray, np.ndarray]:
        """Global (indices, values) of all non-zero entries, indices ascending."""
        idx, val, off = [], [], 0
        for b in self.blocks:
            i, v = b.nonzeros()
            idx.append(np.asarray(i, dtype=np.int64) + off)
            val.append(np.asarray(v, dtype=np.float64))
            off += b.dim
        if not idx:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        return np.concatenate(idx), np.concatenate(val)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.total_dim)
        i, v = self.nonzeros()
        out[i] = v
        return out


def concat(vectors: Sequence[FeatureVector]) -> FeatureVector:
    """Join feature vectors into one long vector; block names must be unique."""
    return FeatureVector(tuple(b for v in vectors for b in v.blocks))


def to_csr(X: Sequence[FeatureVector], layout: dict[str, tuple[int, int]] | None = None):
    """Stack vectors into CSR arrays ``(indptr, indices, data, n_features)``.

    All vectors must share one layout (the first vector's, unless given).
    """
    if not X:
        raise ValueError("no vectors")
    layout = layout if layout is not None else X[0].layout
    indptr = [0]
    idx, val = [], []
    for x in X:
        if x.layout != layout:
            raise LayoutMismatch("feature layout differs between vectors")
        i, v = x.nonzeros()
        idx.append(i)
        val.append(v)
        indptr.append(indptr[-1] + len(i))
    n_features = sum(d for _, d in layout.values())
    return (
        np.asarray(indptr, dtype=np.int64),
        np.concatenate(idx).astype(np.int64),
        np.concatenate(val).astype(np.float64),
        n_features,
    )
