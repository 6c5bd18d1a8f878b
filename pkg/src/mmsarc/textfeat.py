"""Text feature classes: lexical, subjectivity, n-grams, word2vec, readability.

Each extractor returns one named :class:`~mmsarc.vector.Block`.  Hashtags and
emojis are part of the text: the lexicon-based features look at
:meth:`Post.text_tokens` (words, bare hashtags, emojis) and the n-gram
features at :meth:`Post.tokens`.  Readability is computed on regular words
only, since syllables and sentences are not defined for tags and emojis.

Lexicon lookups are case-insensitive; resources are lower-cased on load.
"""

from __future__ import annotations

import hashlib
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .corpus import Post
from .vector import Block, FeatureVector

__all__ = [
    "Scorer",
    "LexResources",
    "NgramVocab",
    "lexical_features",
    "subjectivity_features",
    "build_ngram_vocab",
    "ngram_features",
    "unigram_vocab",
    "embedding_feature",
    "readability_features",
    "combination_features",
    "count_syllables",
    "count_sentences",
    "load_lexicon",
    "load_wordset",
    "load_embeddings",
    "load_frequency_counts",
    "write_resources",
]


class Scorer(Protocol):
    """Anything that maps a token to a score, or None when not covered."""

    def get(self, token: str, default=None): ...


# --------------------------------------------------------------------------
# resources


@dataclass
class LexResources:
    word_log_freq: Mapping[str, float] = field(default_factory=dict)
    formality: Scorer = field(default_factory=dict)
    sentiment: Scorer = field(default_factory=dict)
    subjectivity_lex: Scorer = field(default_factory=dict)
    hedges: frozenset[str] = frozenset()
    contractions: frozenset[str] = frozenset()
    pronouns_1st: frozenset[str] = frozenset()
    pronouns_3rd: frozenset[str] = frozenset()
    embeddings: Mapping[str, np.ndarray] = field(default_factory=dict)
    embedding_dim: int = 0
    syllable_exceptions: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        dims = {len(v) for v in self.embeddings.values()}
        if len(dims) > 1:
            raise ValueError(f"embeddings have mixed dimensions {sorted(dims)}")
        if dims:
            d = dims.pop()
            if self.embedding_dim and self.embedding_dim != d:
                raise ValueError(f"embedding_dim={self.embedding_dim} but vectors have dim {d}")
            self.embedding_dim = d
        bad = [w for w, v in self.word_log_freq.items() if not math.isfinite(v)]
        if bad:
            raise ValueError(f"non-finite log frequency for {bad[:5]}")

    @classmethod
    def from_dir(cls, path: str | Path) -> "LexResources":
        """Load every resource file found in ``path`` (missing ones stay empty).

        Expected names: ``logfreq.tsv``, ``formality.tsv``, ``sentiment.tsv``,
        ``subjectivity.tsv``, ``syllables.tsv`` (two columns); ``hedges.txt``,
        ``contractions.txt``, ``pronouns_1st.txt``, ``pronouns_3rd.txt`` (one
        word per line); ``embeddings.txt`` (word2vec text format).
        """
        path = Path(path)

        def lex(name):
            f = path / name
            return load_lexicon(f) if f.exists() else {}

        def ws(name):
            f = path / name
            return load_wordset(f) if f.exists() else frozenset()

        emb = path / "embeddings.txt"
        vectors, dim = load_embeddings(emb) if emb.exists() else ({}, 0)
        return cls(
            word_log_freq=lex("logfreq.tsv"),
            formality=lex("formality.tsv"),
            sentiment=lex("sentiment.tsv"),
            subjectivity_lex=lex("subjectivity.tsv"),
            hedges=ws("hedges.txt"),
            contractions=ws("contractions.txt"),
            pronouns_1st=ws("pronouns_1st.txt"),
            pronouns_3rd=ws("pronouns_3rd.txt"),
            embeddings=vectors,
            embedding_dim=dim,
            syllable_exceptions={k: int(v) for k, v in lex("syllables.tsv").items()},
        )

    def digest(self) -> str:
        """Stable hash of all resource contents."""
        h = hashlib.sha256()
        for name in ("word_log_freq", "formality", "sentiment", "subjectivity_lex", "syllable_exceptions"):
            m = getattr(self, name)
            for k in sorted(m):
                h.update(f"{name}\t{k}\t{float(m[k])!r}\n".encode())
        for name in ("hedges", "contractions", "pronouns_1st", "pronouns_3rd"):
            for k in sorted(getattr(self, name)):
                h.update(f"{name}\t{k}\n".encode())
        for k in sorted(self.embeddings):
            h.update(k.encode() + b"\t" + np.asarray(self.embeddings[k], dtype="<f8").tobytes())
        return h.hexdigest()


def load_lexicon(path: str | Path) -> dict[str, float]:
    """Two-column ``word score`` file (tab or space separated, '#' comments)."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t") if "\t" in line else line.rsplit(None, 1)
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'word score'")
            out[parts[0].strip().lower()] = float(parts[1])
    return out


def load_wordset(path: str | Path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(
            w.strip().lower() for w in fh if w.strip() and not w.lstrip().startswith("#")
        )


def load_frequency_counts(path: str | Path, base: float = math.e) -> dict[str, float]:
    """Turn a ``word count`` file into log frequencies (natural log by default)."""
    counts = load_lexicon(path)
    if any(c <= 0 for c in counts.values()):
        raise ValueError("frequency counts must be positive")
    return {w: math.log(c) / math.log(base) for w, c in counts.items()}


def load_embeddings(path: str | Path) -> tuple[dict[str, np.ndarray], int]:
    """word2vec text format: header ``count dim`` then ``word v1 ... vdim``."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: header must be 'count dim'")
        count, dim = int(header[0]), int(header[1])
        vectors = {}
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip().split(" ")
            if len(parts) == 1 and not parts[0]:
                continue
            if len(parts) != dim + 1:
                raise ValueError(f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}")
            vectors[parts[0]] = np.array([float(v) for v in parts[1:]])
    if len(vectors) != count:
        raise ValueError(f"{path}: header says {count} words, found {len(vectors)}")
    return vectors, dim


def _covered_mean(tokens: Iterable[str], table) -> float:
    scores = [table.get(t.lower()) for t in tokens]
    scores = [s for s in scores if s is not None]
    return float(sum(scores) / len(scores)) if scores else 0.0


# --------------------------------------------------------------------------
# lexical and subjectivity


def lexical_features(p: Post, r: LexResources) -> Block:
    """[avg token length, avg log-frequency, #contractions, avg formality]."""
    toks = p.text_tokens()
    avg_len = sum(len(t) for t in toks) / len(toks) if toks else 0.0
    contractions = sum(1 for t in toks if t.lower().replace("’", "'") in r.contractions)
    return Block.from_dense(
        "lexical",
        [avg_len, _covered_mean(toks, r.word_log_freq), contractions, _covered_mean(toks, r.formality)],
    )


BE_FORMS = frozenset({"be", "am", "is", "are", "was", "were", "been", "being", "'s", "'re", "'m"})


@lru_cache(maxsize=1)
def irregular_participles() -> frozenset[str]:
    text = resources.files("mmsarc").joinpath("data/irregular_participles.txt").read_text("utf-8")
    return frozenset(w.strip().lower() for w in text.split() if w.strip())


def count_passives(words: Sequence[str]) -> int:
    """A form of "be" followed within two tokens by a past participle."""
    low = [w.lower() for w in words]
    irregular = irregular_participles()
    n = 0
    for i, w in enumerate(low):
        if w not in BE_FORMS:
            continue
        for nxt in low[i + 1 : i + 3]:
            if (nxt.endswith("ed") and len(nxt) > 2) or nxt in irregular:
                n += 1
                break
    return n


def subjectivity_features(p: Post, r: LexResources) -> Block:
    """[subjectivity, sentiment, #passives, #hedges, #1st-person, #3rd-person]."""
    toks = p.text_tokens()
    low = [t.lower() for t in toks]
    return Block.from_dense(
        "subjectivity",
        [
            _covered_mean(toks, r.subjectivity_lex),
            _covered_mean(toks, r.sentiment),
            count_passives(p.words),
            sum(1 for t in low if t in r.hedges),
            sum(1 for t in low if t in r.pronouns_1st),
            sum(1 for t in low if t in r.pronouns_3rd),
        ],
    )


# --------------------------------------------------------------------------
# n-grams


Ngram = tuple[str, ...]


@dataclass(frozen=True)
class NgramVocab:
    entries: Mapping[Ngram, int]
    built_on: str = "train"
    max_n: int = 2

    def __post_init__(self):
        if sorted(self.entries.values()) != list(range(len(self.entries))):
            raise ValueError("vocabulary indices must be dense in [0, size)")

    def __len__(self):
        return len(self.entries)

    def __contains__(self, g):
        return g in self.entries

    def digest(self) -> str:
        h = hashlib.sha256(f"{self.max_n}\n".encode())
        for g, i in sorted(self.entries.items(), key=lambda kv: kv[1]):
            h.update(("\x1f".join(g) + f"\t{i}\n").encode())
        return h.hexdigest()

    def to_lines(self) -> list[str]:
        return [" ".join(g) for g, _ in sorted(self.entries.items(), key=lambda kv: kv[1])]

    @classmethod
    def from_lines(cls, lines: Iterable[str], built_on: str = "train", max_n: int = 2) -> "NgramVocab":
        grams = [tuple(line.split(" ")) for line in lines if line]
        return cls({g: i for i, g in enumerate(grams)}, built_on, max_n)


def post_ngrams(p: Post, max_n: int = 2) -> list[Ngram]:
    toks = [t.lower() for t in p.tokens()]
    out = []
    for n in range(1, max_n + 1):
        out += [tuple(toks[i : i + n]) for i in range(len(toks) - n + 1)]
    return out


def build_ngram_vocab(
    train_posts: Sequence[Post], min_count: int = 1, max_n: int = 2, built_on: str = "train"
) -> NgramVocab:
    """Unigram + bigram vocabulary of the training split, indexed in sorted order."""
    if not train_posts:
        raise ValueError("cannot build a vocabulary from an empty training set")
    counts = Counter(g for p in train_posts for g in post_ngrams(p, max_n))
    kept = sorted(g for g, c in counts.items() if c >= min_count)
    return NgramVocab({g: i for i, g in enumerate(kept)}, built_on, max_n)


def unigram_vocab(train_posts: Sequence[Post], min_count: int = 1) -> NgramVocab:
    return build_ngram_vocab(train_posts, min_count, max_n=1)


def ngram_features(p: Post, v: NgramVocab, name: str = "ngrams") -> Block:
    """One-hot presence of in-vocabulary n-grams; unknown n-grams are ignored."""
    idx = {v.entries[g] for g in post_ngrams(p, v.max_n) if g in v.entries}
    return Block.onehot(name, len(v), idx)


# --------------------------------------------------------------------------
# embeddings


def embedding_feature(p: Post, r: LexResources) -> Block:
    """Mean word vector of the covered tokens; zeros when nothing is covered."""
    vecs = []
    for t in p.text_tokens():
        v = r.embeddings.get(t)
        if v is None:
            v = r.embeddings.get(t.lower())
        if v is not None:
            vecs.append(v)
    if not vecs:
        return Block.from_dense("embedding", np.zeros(r.embedding_dim))
    return Block.from_dense("embedding", np.mean(vecs, axis=0))


# --------------------------------------------------------------------------
# readability

VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")
SENTENCE_END_RE = re.compile(r"[.?!]+")


def count_syllables(word: str, exceptions: Mapping[str, int] | None = None) -> int:
    """Vowel-group syllable count with a silent final 'e' and an exceptions table."""
    w = word.lower().replace("’", "'")
    if exceptions and w in exceptions:
        return int(exceptions[w])
    w = re.sub(r"[^a-z]", "", w)
    n = len(VOWEL_GROUP_RE.findall(w))
    if (
        n > 1
        and w.endswith("e")
        and w[-2] not in "aeiouy"
        and not (w.endswith("le") and len(w) > 2 and w[-3] not in "aeiouy")
    ):
        n -= 1
    return max(n, 1)


def count_sentences(text: str) -> int:
    return max(len(SENTENCE_END_RE.findall(text)), 1)


def flesch_kincaid_grade(n_words: int, n_sentences: int, n_syllables: int) -> float:
    if n_words == 0:
        return 0.0
    return 0.39 * (n_words / n_sentences) + 11.8 * (n_syllables / n_words) - 15.59


def readability_features(p: Post, r: LexResources | None = None) -> Block:
    """[word count, character count, Flesch-Kincaid grade]."""
    exc = r.syllable_exceptions if r is not None else None
    words = p.words
    syllables = sum(count_syllables(w, exc) for w in words)
    grade = flesch_kincaid_grade(len(words), count_sentences(p.raw_text), syllables)
    return Block.from_dense("readability", [len(words), len(p.raw_text), grade])


def combination_features(p: Post, v: NgramVocab, r: LexResources) -> FeatureVector:
    return FeatureVector.of(ngram_features(p, v), embedding_feature(p, r), readability_features(p, r))


def write_resources(r: LexResources, path: str | Path) -> None:
    """Write ``r`` in the layout :meth:`LexResources.from_dir` reads."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for name, table in (
        ("logfreq.tsv", r.word_log_freq),
        ("formality.tsv", r.formality),
        ("sentiment.tsv", r.sentiment),
        ("subjectivity.tsv", r.subjectivity_lex),
        ("syllables.tsv", r.syllable_exceptions),
    ):
        if table:
            lines = [f"{w}\t{float(table[w])!r}" for w in sorted(table)]
            (path / name).write_text("\n".join(lines) + "\n", encoding="utf-8")
    for name, words in (
        ("hedges.txt", r.hedges),
        ("contractions.txt", r.contractions),
        ("pronouns_1st.txt", r.pronouns_1st),
        ("pronouns_3rd.txt", r.pronouns_3rd),
    ):
        if words:
            (path / name).write_text("\n".join(sorted(words)) + "\n", encoding="utf-8")
    if r.embeddings:
        lines = [f"{len(r.embeddings)} {r.embedding_dim}"]
        lines += [w + " " + " ".join(repr(float(x)) for x in r.embeddings[w]) for w in sorted(r.embeddings)]
        (path / "embeddings.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
