"""Synthetic text/image incongruity corpus.

Every post pairs a sentiment word in the text with a weather concept in the
image; a post is sarcastic exactly when the two disagree ("lovely" + rain).

* Text-cue posts (fraction ``1 - q``) also name the weather in the text
  ("lovely rain again #rain") and their image shows that same weather, so
  the label can be read off the text alone.
* Image-cue posts (fraction ``q``) always use a positive sentiment word and
  never mention the weather; whether they are sarcastic depends only on the
  image, and their text is distributed identically for both classes.

A text-only classifier therefore cannot beat 0.5 on the image-cue part
(Bayes accuracy ``1 - q / 2`` overall), while text + image is fully
determined.  Classes are balanced within both parts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Label, Post
from .textfeat import LexResources
from .visfeat import ConceptVocab, FeatureStore, ImageFeatures

__all__ = ["SynthParams", "SynthCorpus", "synth_incongruity_corpus"]

POSITIVE = ("lovely", "great", "wonderful", "beautiful", "perfect", "amazing")
NEGATIVE = ("awful", "terrible", "horrible", "dreadful", "miserable", "gloomy")
GOOD_WEATHER = ("sunshine", "beach", "bluesky", "flowers")
BAD_WEATHER = ("rain", "storm", "snow", "fog")
DISTRACTORS = ("head", "outside", "monochrome", "people", "car", "tree", "building", "food", "dog", "night")
FILLERS = (
    "what", "a", "day", "today", "just", "so", "this", "morning", "again", "here",
    "out", "we", "got", "the", "weekend", "is", "really", "totally", "always", "now",
)
EMOJIS = ("😂", "🙃", "😎", "👍", "🙄")


@dataclass(frozen=True)
class SynthParams:
    q: float = 0.5
    avr_dim: int = 4096
    # expected L2 norm of an AVR vector
    avr_scale: float = 3.0
    avr_noise: float = 0.05
    embedding_dim: int = 16
    platforms: tuple[str, ...] = ("IG",)
    random_labels: bool = False

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must be in [0, 1]")


@dataclass
class SynthCorpus:
    posts: list[Post]
    store: FeatureStore
    resources: LexResources
    image_cue: dict[str, bool]  # post id -> label recoverable from the image only
    params: SynthParams

    def bayes_accuracy(self, modality: str) -> float:
        """Best achievable accuracy with ``"text"`` or ``"fusion"`` inputs."""
        if self.params.random_labels:
            return 0.5
        if modality == "fusion":
            return 1.0
        if modality == "text":
            frac = sum(self.image_cue.values()) / len(self.image_cue)
            return 1.0 - 0.5 * frac
        raise ValueError(f"unknown modality {modality!r}")


def _balanced_flags(n: int, rng) -> np.ndarray:
    flags = np.zeros(n, dtype=bool)
    flags[: n // 2] = True
    return rng.permutation(flags)


def synth_incongruity_corpus(n: int, seed: int = 0, params: SynthParams = SynthParams()) -> SynthCorpus:
    if n < 40:
        raise ValueError("n must be at least 40")
    rng = np.random.default_rng(seed)
    n_image = int(round(params.q * n))
    n_text = n - n_image
    concepts = ConceptVocab(tuple(sorted(GOOD_WEATHER + BAD_WEATHER + DISTRACTORS)))

    protos = {}
    for c in concepts.names:
        v = rng.exponential(1.0, params.avr_dim) * (rng.random(params.avr_dim) < 0.1)
        protos[c] = v / (np.linalg.norm(v) or 1.0)

    specs = []  # (image_cue, sentiment word, weather concept, text mentions weather)
    for sarcastic in _balanced_flags(n_image, rng):
        weather = rng.choice(BAD_WEATHER if sarcastic else GOOD_WEATHER)
        specs.append((True, rng.choice(POSITIVE), weather, bool(sarcastic)))
    for sarcastic in _balanced_flags(n_text, rng):
        positive = rng.random() < 0.5
        # disagreement is sarcasm: positive words with bad weather or vice versa
        bad = positive == bool(sarcastic)
        weather = rng.choice(BAD_WEATHER if bad else GOOD_WEATHER)
        specs.append((False, rng.choice(POSITIVE if positive else NEGATIVE), weather, bool(sarcastic)))
    order = rng.permutation(len(specs))

    if params.random_labels:
        flips = _balanced_flags(n, rng)

    posts, images, image_cue = [], {}, {}
    for k, j in enumerate(order):
        cue_in_image, senti, weather, sarcastic = specs[j]
        if params.random_labels:
            sarcastic = bool(flips[k])
        fill = list(rng.choice(FILLERS, size=int(rng.integers(3, 6))))
        if cue_in_image:
            words = fill[:2] + [senti] + fill[2:]
            tags = []
        else:
            words = fill[:2] + [senti, weather] + fill[2:]
            tags = [weather]
        text = " ".join(words)
        if tags:
            text += " " + " ".join("#" + t for t in tags)
        if rng.random() < 0.3:
            text += " " + rng.choice(EMOJIS)

        pid = f"syn-{k:05d}"
        iid = f"img-{k:05d}"
        platform = params.platforms[k % len(params.platforms)]
        extra = list(rng.choice(DISTRACTORS, size=int(rng.integers(0, 3)), replace=False))
        det = {weather: float(rng.uniform(0.5, 1.0))}
        det.update({c: float(rng.uniform(0.05, 0.9)) for c in extra})
        avr = protos[weather] + sum((0.5 * protos[c] for c in extra), np.zeros(params.avr_dim))
        avr = avr + params.avr_noise * rng.random(params.avr_dim) / np.sqrt(params.avr_dim)
        avr = np.maximum(avr, 0.0) * params.avr_scale
        images[iid] = ImageFeatures(iid, det, avr)
        posts.append(
            Post.from_text(
                pid, platform, text, image_ids=[iid],
                label=Label.SARCASTIC if sarcastic else Label.NON_SARCASTIC,
            )
        )
        image_cue[pid] = cue_in_image

    store = FeatureStore(images, concepts, params.avr_dim)
    return SynthCorpus(posts, store, _resources(rng, params.embedding_dim), image_cue, params)


def _resources(rng, dim: int) -> LexResources:
    vocab = sorted(set(POSITIVE + NEGATIVE + GOOD_WEATHER + BAD_WEATHER + FILLERS))
    sentiment = {w: 0.8 for w in POSITIVE}
    sentiment.update({w: -0.8 for w in NEGATIVE})
    return LexResources(
        word_log_freq={w: float(np.log(rng.integers(10, 10_000))) for w in vocab},
        formality={w: float(rng.uniform(-1, 1)) for w in vocab},
        sentiment=sentiment,
        subjectivity_lex={w: 0.9 for w in POSITIVE + NEGATIVE},
        hedges=frozenset({"really", "totally", "just"}),
        contractions=frozenset({"don't", "can't", "it's"}),
        pronouns_1st=frozenset({"i", "we", "me", "my", "us"}),
        pronouns_3rd=frozenset({"he", "she", "they", "it"}),
        embeddings={w: rng.normal(size=dim) for w in vocab},
        embedding_dim=dim,
    )
