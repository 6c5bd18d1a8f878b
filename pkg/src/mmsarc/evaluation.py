"""Evaluation protocol and experiment grid.

Models are trained on one half of a class-balanced corpus and tested on the
other half (silver regime), or trained on the silver data and tested on a
crowd-validated gold set (D-50 / D-80 / D-100).  Accuracy is the only metric;
chance level on balanced test sets is 0.5.
"""

from __future__ import annotations

import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import fusionnet, svm
from .annotate import GoldSet
from .corpus import Label, Platform, Post
from .textfeat import (
    LexResources,
    NgramVocab,
    build_ngram_vocab,
    combination_features,
    embedding_feature,
    lexical_features,
    ngram_features,
    subjectivity_features,
    unigram_vocab,
)
from .vector import FeatureVector, concat
from .visfeat import FeatureStore, post_image_block

__all__ = [
    "Method",
    "Regime",
    "SVM_FEATURE_SETS",
    "DEEP_FEATURE_SETS",
    "ExperimentConfig",
    "Report",
    "balanced_split",
    "accuracy",
    "svm_features",
    "net_inputs",
    "run_experiment",
]


class Method(str, enum.Enum):
    SVM = "svm_fusion"
    DEEP = "deep_fusion"


class Regime(str, enum.Enum):
    SILVER = "silver"
    GOLD_D50 = "gold_d50"
    GOLD_D80 = "gold_d80"
    GOLD_D100 = "gold_d100"


SVM_FEATURE_SETS = (
    "lexical",
    "subjectivity",
    "ngrams",
    "word2vec",
    "combination",
    "vsf_only",
    "ngrams+vsf",
    "combination+vsf",
)
DEEP_FEATURE_SETS = ("unigram", "avr_only", "unigram+avr")
DEEP_MODES = {
    "unigram": fusionnet.Mode.TEXT_ONLY,
    "avr_only": fusionnet.Mode.IMAGE_ONLY,
    "unigram+avr": fusionnet.Mode.FUSION,
}


# --------------------------------------------------------------------------
# protocol primitives


def _sign(p: Post) -> int:
    if p.label is Label.UNLABELED:
        raise ValueError(f"post {p.id} is unlabeled")
    return p.label.sign()


def balanced_split(posts: Sequence[Post], ratio: float = 0.5, seed: int = 0) -> tuple[list[Post], list[Post]]:
    """Stratified train/test split.

    Each class is shuffled with a seeded generator and its first
    ``floor(ratio * n_class)`` members go to training, the rest to testing.
    Both halves keep the input order.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be in (0, 1)")
    by_class: dict[int, list[int]] = {1: [], -1: []}
    for i, p in enumerate(posts):
        by_class[_sign(p)].append(i)
    for c, members in by_class.items():
        if len(members) < 2:
            raise ValueError(f"class {c:+d} has {len(members)} posts; need at least 2")
    rng = np.random.default_rng(seed)
    train_idx = set()
    for c in (1, -1):
        members = by_class[c]
        k = int(np.floor(ratio * len(members)))
        order = rng.permutation(len(members))
        train_idx.update(members[j] for j in order[:k])
    train = [p for i, p in enumerate(posts) if i in train_idx]
    test = [p for i, p in enumerate(posts) if i not in train_idx]
    return train, test


def accuracy(preds: Sequence, labels: Sequence) -> float:
    if len(preds) != len(labels):
        raise ValueError(f"{len(preds)} predictions for {len(labels)} labels")
    if len(preds) == 0:
        raise ValueError("accuracy of an empty prediction set")
    return float(np.mean(np.asarray(preds) == np.asarray(labels)))


# --------------------------------------------------------------------------
# feature sets


@dataclass
class FeatureContext:
    resources: LexResources
    store: FeatureStore
    ngram_vocab: NgramVocab | None = None
    policy: str = "union"
    vsf_threshold: float = 0.0


def svm_features(p: Post, feature_set: str, ctx: FeatureContext) -> FeatureVector:
    r = ctx.resources

    def vsf():
        return FeatureVector.of(post_image_block(p, ctx.store, ctx.policy, "vsf", ctx.vsf_threshold))

    if feature_set == "lexical":
        return FeatureVector.of(lexical_features(p, r))
    if feature_set == "subjectivity":
        return FeatureVector.of(subjectivity_features(p, r))
    if feature_set == "ngrams":
        return FeatureVector.of(ngram_features(p, ctx.ngram_vocab))
    if feature_set == "word2vec":
        return FeatureVector.of(embedding_feature(p, r))
    if feature_set == "combination":
        return combination_features(p, ctx.ngram_vocab, r)
    if feature_set == "vsf_only":
        return vsf()
    if feature_set == "ngrams+vsf":
        return concat([FeatureVector.of(ngram_features(p, ctx.ngram_vocab)), vsf()])
    if feature_set == "combination+vsf":
        return concat([combination_features(p, ctx.ngram_vocab, r), vsf()])
    raise ValueError(f"unknown SVM feature set {feature_set!r}")


def net_inputs(
    posts: Sequence[Post], vocab: NgramVocab, store: FeatureStore, policy: str = "union"
) -> fusionnet.NetDataset:
    """One-hot unigram rows, AVR rows and class indices (1 = sarcastic)."""
    text = np.zeros((len(posts), len(vocab)))
    for i, p in enumerate(posts):
        idx = ngram_features(p, vocab, "unigram").indices
        text[i, idx] = 1.0
    avr = np.stack([post_image_block(p, store, policy, "avr").dense for p in posts])
    y = np.array([1 if p.label is Label.SARCASTIC else 0 for p in posts])
    return fusionnet.NetDataset(text, avr, y)


# --------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentConfig:
    method: Method = Method.SVM
    feature_sets: tuple[str, ...] = SVM_FEATURE_SETS
    split_ratio: float = 0.5
    seed: int = 0
    regime: Regime = Regime.SILVER
    platforms: tuple[str, ...] | None = None  # None: every platform present
    min_count: int = 1
    policy: str = "union"
    vsf_threshold: float = 0.0
    svm: svm.TrainConfig = field(default_factory=svm.TrainConfig)
    net: fusionnet.NetTrainConfig = field(default_factory=fusionnet.NetTrainConfig)
    text_hidden: int = 512

    def __post_init__(self):
        self.method = Method(self.method)
        self.regime = Regime(self.regime)
        self.feature_sets = tuple(self.feature_sets)
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError("split_ratio must be in (0, 1)")
        valid = SVM_FEATURE_SETS if self.method is Method.SVM else DEEP_FEATURE_SETS
        bad = [f for f in self.feature_sets if f not in valid]
        if bad:
            raise ValueError(f"feature sets {bad} are not valid for {self.method.value}")
        if isinstance(self.svm, dict):
            self.svm = svm.TrainConfig(**self.svm)
        if isinstance(self.net, dict):
            self.net = fusionnet.NetTrainConfig(**self.net)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        d = dict(d)
        for key in ("feature_sets", "platforms"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        d["regime"] = self.regime.value
        d["net"]["mode"] = self.net.mode.value
        return d


@dataclass
class Report:
    method: Method
    regime: Regime
    feature_sets: tuple[str, ...]
    platforms: tuple[str, ...]
    cells: dict[tuple[str, str], float]
    sizes: dict[str, dict[str, int]]
    seed: int
    timings: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.cells.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"accuracy {v} for {k} outside [0, 1]")

    def grid(self) -> np.ndarray:
        return np.array([[self.cells[f, p] for p in self.platforms] for f in self.feature_sets])

    def to_text(self) -> str:
        """Aligned table: one row per feature set, one column per platform (percent)."""
        w0 = max(len("Feature Set"), *(len(f) for f in self.feature_sets))
        head = f"{'Feature Set':<{w0}} | " + " | ".join(f"{p:>6}" for p in self.platforms)
        rule = "-" * len(head)
        lines = [f"{self.method.value} / {self.regime.value} (accuracy %)", rule, head, rule]
        for f in self.feature_sets:
            row = " | ".join(f"{100 * self.cells[f, p]:6.1f}" for p in self.platforms)
            lines.append(f"{f:<{w0}} | {row}")
        lines.append(rule)
        for p in self.platforms:
            s = self.sizes[p]
            lines.append(f"{p}: train={s['train']} test={s['test']}")
        return "\n".join(lines) + "\n"

    def to_kv(self) -> str:
        """``key=value`` lines; accuracies in repr form so they round-trip."""
        lines = [
            f"method={self.method.value}",
            f"regime={self.regime.value}",
            f"seed={self.seed}",
        ]
        for p in self.platforms:
            lines.append(f"size.{p}.train={self.sizes[p]['train']}")
            lines.append(f"size.{p}.test={self.sizes[p]['test']}")
        for f in self.feature_sets:
            for p in self.platforms:
                lines.append(f"accuracy.{f}.{p}={self.cells[f, p]!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_kv(cls, text: str) -> "Report":
        kv = dict(line.split("=", 1) for line in text.splitlines() if line)
        cells, sizes, fsets, plats = {}, {}, [], []
        for k, v in kv.items():
            if k.startswith("accuracy."):
                _, rest = k.split(".", 1)
                f, p = rest.rsplit(".", 1)
                cells[f, p] = float(v)
                fsets.append(f) if f not in fsets else None
                plats.append(p) if p not in plats else None
            elif k.startswith("size."):
                _, p, part = k.split(".")
                sizes.setdefault(p, {})[part] = int(v)
        return cls(
            Method(kv["method"]), Regime(kv["regime"]), tuple(fsets), tuple(plats), cells, sizes, int(kv["seed"])
        )


def _gold_for(regime: Regime, gold: Mapping[Regime, GoldSet] | GoldSet | None) -> GoldSet:
    if isinstance(gold, GoldSet):
        return gold
    if not gold or regime not in gold:
        raise ValueError(f"regime {regime.value} needs a gold set")
    return gold[regime]


def _platform_data(posts, platform, cfg, gold):
    """(train, test) posts for one platform under the configured regime."""
    mine = [p for p in posts if p.platform.value == platform]
    if cfg.regime is Regime.SILVER:
        return balanced_split(mine, cfg.split_ratio, cfg.seed)
    gs = _gold_for(cfg.regime, gold)
    labels = gs.labels()
    test = [p for p in mine if p.id in labels]
    if not test:
        raise ValueError(f"no gold posts for platform {platform}")
    # test posts take their labels from the gold set
    test = [replace(p, label=Label.SARCASTIC if labels[p.id] == 1 else Label.NON_SARCASTIC) for p in test]
    silver = [p for p in mine if p.id not in labels and p.label is not Label.UNLABELED]
    train, _ = balanced_split(silver, cfg.split_ratio, cfg.seed)
    if {p.id for p in train} & {p.id for p in test}:
        raise AssertionError("gold test posts leaked into training")
    return train, test


def _svm_cell(train, test, fs, cfg, resources, store) -> float:
    vocab = None
    if "ngrams" in fs or "combination" in fs:
        vocab = build_ngram_vocab(train, cfg.min_count, built_on="train")
    ctx = FeatureContext(resources, store, vocab, cfg.policy, cfg.vsf_threshold)
    Xtr = [svm_features(p, fs, ctx) for p in train]
    Xte = [svm_features(p, fs, ctx) for p in test]
    model = svm.train(Xtr, [_sign(p) for p in train], cfg.svm)
    pred, _ = svm.predict_many(model, Xte)
    return accuracy(pred, [_sign(p) for p in test])


def _deep_cell(train, test, fs, cfg, store) -> float:
    vocab = unigram_vocab(train, cfg.min_count)
    dtr = net_inputs(train, vocab, store, cfg.policy)
    dte = net_inputs(test, vocab, store, cfg.policy)
    net_cfg = fusionnet.NetConfig(len(vocab), cfg.text_hidden, store.avr_dim)
    tcfg = fusionnet.NetTrainConfig(**{**asdict(cfg.net), "mode": DEEP_MODES[fs]})
    net = fusionnet.train(dtr, net_cfg, tcfg)
    return accuracy(net.predict(dte.text, dte.avr), dte.y)


def run_experiment(
    cfg: ExperimentConfig,
    posts: Sequence[Post],
    store: FeatureStore,
    resources: LexResources | None = None,
    gold: Mapping[Regime, GoldSet] | GoldSet | None = None,
    threads: int = 1,
) -> Report:
    """Train and test every (feature set, platform) cell of the grid.

    Cells are independent and may run on ``threads`` workers; results are
    collected by key, so the report does not depend on completion order.
    """
    resources = resources or LexResources()
    present = {p.platform.value for p in posts}
    platforms = cfg.platforms or tuple(pl.value for pl in Platform if pl.value in present)
    splits, sizes = {}, {}
    for pl in platforms:
        train, test = _platform_data(posts, pl, cfg, gold)
        splits[pl] = (train, test)
        sizes[pl] = {"train": len(train), "test": len(test)}

    def run(key):
        fs, pl = key
        t0 = time.perf_counter()
        train, test = splits[pl]
        if cfg.method is Method.SVM:
            acc = _svm_cell(train, test, fs, cfg, resources, store)
        else:
            acc = _deep_cell(train, test, fs, cfg, store)
        return key, acc, time.perf_counter() - t0

    keys = [(f, p) for f in cfg.feature_sets for p in platforms]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, keys))
    else:
        results = [run(k) for k in keys]
    cells = {k: acc for k, acc, _ in results}
    timings = {f"{k[0]}.{k[1]}": dt for k, _, dt in results}
    return Report(cfg.method, cfg.regime, tuple(cfg.feature_sets), tuple(platforms), cells, sizes, cfg.seed, timings)
