"""Precomputed image features: concept detections (VSF) and dense vectors (AVR).

Both come from files keyed by image id.  Concept file, one image per line::

    img-1 head:0.93 outside:0.12 monochrome

AVR file: a header line ``dim <d>`` followed by ``image_id v1 ... vd``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Post
from .vector import Block

__all__ = [
    "AVR_DIM",
    "ConceptVocab",
    "ImageFeatures",
    "FeatureStore",
    "UnknownConcept",
    "MissingImage",
    "vsf_onehot",
    "post_image_block",
    "read_concepts",
    "write_concepts",
    "read_avr",
    "write_avr",
]

AVR_DIM = 4096


class UnknownConcept(KeyError):
    pass


class MissingImage(KeyError):
    pass


@dataclass(frozen=True)
class ConceptVocab:
    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("concept names must be unique")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(self.names)})

    @property
    def size(self) -> int:
        return len(self.names)

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownConcept(name) from None

    @classmethod
    def from_file(cls, path: str | Path) -> "ConceptVocab":
        with open(path, encoding="utf-8") as fh:
            return cls(tuple(line.strip() for line in fh if line.strip()))


@dataclass(frozen=True)
class ImageFeatures:
    image_id: str
    # concept -> confidence (None when the file gave no score)
    detected_concepts: Mapping[str, float | None] = field(default_factory=dict)
    avr: np.ndarray | None = None


def vsf_onehot(f: ImageFeatures, v: ConceptVocab, threshold: float = 0.0) -> Block:
    """One-hot over the concept vocabulary; confidences never enter the values.

    ``threshold`` (default 0: keep everything) optionally drops detections
    whose confidence is below it.
    """
    idx = []
    for name, conf in f.detected_concepts.items():
        i = v.index(name)
        if threshold > 0 and conf is not None and conf < threshold:
            continue
        idx.append(i)
    return Block.onehot("vsf", v.size, idx)


@dataclass
class FeatureStore:
    """Image features by id; read-only once loaded."""

    images: dict[str, ImageFeatures]
    vocab: ConceptVocab | None = None
    avr_dim: int = AVR_DIM

    def __getitem__(self, image_id: str) -> ImageFeatures:
        try:
            return self.images[image_id]
        except KeyError:
            raise MissingImage(image_id) from None

    def __contains__(self, image_id):
        return image_id in self.images

    def ids(self) -> set[str]:
        return set(self.images)

    @classmethod
    def load(
        cls,
        concepts: str | Path | None = None,
        avr: str | Path | None = None,
        vocab: ConceptVocab | None = None,
        avr_dim: int = AVR_DIM,
    ) -> "FeatureStore":
        det = read_concepts(concepts) if concepts else {}
        vecs = read_avr(avr, avr_dim) if avr else {}
        if vocab is None and det:
            vocab = ConceptVocab(tuple(sorted({c for d in det.values() for c in d})))
        images = {
            i: ImageFeatures(i, det.get(i, {}), vecs.get(i)) for i in sorted(set(det) | set(vecs))
        }
        if vocab is not None:
            for f in images.values():
                for c in f.detected_concepts:
                    vocab.index(c)
        return cls(images, vocab, avr_dim)

    def digest(self) -> str:
        h = hashlib.sha256()
        for i in sorted(self.images):
            f = self.images[i]
            h.update(i.encode() + b"\n")
            for c in sorted(f.detected_concepts):
                h.update(f"{c}:{f.detected_concepts[c]!r}\n".encode())
            if f.avr is not None:
                h.update(np.asarray(f.avr, dtype="<f8").tobytes())
        return h.hexdigest()


def post_image_block(
    p: Post, store: FeatureStore, policy: str = "union", kind: str = "vsf", threshold: float = 0.0
) -> Block:
    """Image block of a post.

    ``kind`` is ``"vsf"`` (one-hot concepts) or ``"avr"`` (dense vector).
    Policy ``"union"`` takes the union of concepts and the element-wise mean
    of AVR vectors over all images; ``"first"`` uses the first image only.
    """
    if policy not in ("union", "first"):
        raise ValueError(f"unknown multi-image policy {policy!r}")
    feats = [store[i] for i in p.image_ids]
    if policy == "first":
        feats = feats[:1]
    if kind == "vsf":
        if store.vocab is None:
            raise ValueError("feature store has no concept vocabulary")
        idx = set()
        for f in feats:
            idx |= vsf_onehot(f, store.vocab, threshold).index_set()
        return Block.onehot("vsf", store.vocab.size, idx)
    if kind == "avr":
        vecs = [f.avr for f in feats if f.avr is not None]
        if len(vecs) != len(feats):
            missing = [f.image_id for f in feats if f.avr is None]
            raise MissingImage(f"no AVR vector for {missing}")
        if not vecs:
            return Block.from_dense("avr", np.zeros(store.avr_dim))
        return Block.from_dense("avr", np.mean(vecs, axis=0))
    raise ValueError(f"unknown image feature kind {kind!r}")


# --------------------------------------------------------------------------
# file formats


def read_concepts(path: str | Path) -> dict[str, dict[str, float | None]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            det = {}
            for item in parts[1:]:
                name, sep, conf = item.rpartition(":")
                if not sep:
                    det[item] = None
                    continue
                try:
                    score = float(conf)
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: bad confidence in {item!r}") from None
                if not math.isfinite(score):
                    raise ValueError(f"{path}:{lineno}: non-finite confidence")
                det[name] = score
            out[parts[0]] = det
    return out


def write_concepts(store: Mapping[str, Mapping[str, float | None]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i in sorted(store):
            items = [c if s is None else f"{c}:{s!r}" for c, s in store[i].items()]
            fh.write(" ".join([i, *items]) + "\n")


def read_avr(path: str | Path, expected_dim: int = AVR_DIM) -> dict[str, np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "dim":
            raise ValueError(f"{path}: first line must be 'dim <d>'")
        dim = int(header[1])
        if dim != expected_dim:
            raise ValueError(f"{path}: AVR dim {dim}, expected {expected_dim}")
        out = {}
        for lineno, line in enumerate(fh, 2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != dim + 1:
                raise ValueError(f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}")
            out[parts[0]] = np.array([float(x) for x in parts[1:]])
    return out


def write_avr(vectors: Mapping[str, Sequence[float]], path: str | Path, dim: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim {dim}\n")
        for i in sorted(vectors):
            v = np.asarray(vectors[i], dtype=np.float64)
            if v.shape != (dim,):
                raise ValueError(f"AVR for {i} has shape {v.shape}, expected ({dim},)")
            fh.write(i + " " + " ".join(repr(float(x)) for x in v) + "\n")
