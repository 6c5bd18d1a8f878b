"""Posts, tokenization, corpus filtering and corpus statistics.

A post has a textual component (regular words, hashtags, emojis) and a
visual component (zero or more image references).  Posts are read from a
line-delimited JSON file, one record per line::

    {"id": "ig-1", "platform": "IG", "text": "rubbish weather #liverpool",
     "tags": [], "image_ids": ["img-1"], "label": "sarcastic"}

Language filtering and retweet/reblog removal are expected to have happened
upstream; nothing here re-implements them.
"""

from __future__ import annotations

import bisect
import enum
import json
import re
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence
from urllib.parse import urlsplit

__all__ = [
    "Platform",
    "Label",
    "Post",
    "FilterConfig",
    "RejectReason",
    "Verdict",
    "CorpusStats",
    "EmptyCorpusError",
    "EmojiTable",
    "tokenize",
    "filter_post",
    "strip_collection_artifacts",
    "corpus_stats",
    "read_corpus",
    "write_corpus",
]


class Platform(str, enum.Enum):
    IG = "IG"
    TU = "TU"
    TW = "TW"


class Label(str, enum.Enum):
    SARCASTIC = "sarcastic"
    NON_SARCASTIC = "non_sarcastic"
    UNLABELED = "unlabeled"

    def sign(self) -> int:
        if self is Label.UNLABELED:
            raise ValueError("unlabeled post has no class sign")
        return 1 if self is Label.SARCASTIC else -1


# images per post allowed by each platform: (min, max); None = unbounded
IMAGE_BOUNDS = {
    Platform.IG: (1, 1),
    Platform.TU: (0, 10),
    Platform.TW: (0, None),
}


class EmptyCorpusError(ValueError):
    pass


# --------------------------------------------------------------------------
# emoji table


class EmojiTable:
    """Sorted, merged codepoint intervals loaded from a text file."""

    # modifiers that extend the preceding emoji rather than start a new one
    VARIATION_SELECTOR = 0xFE0F
    JOINER = 0x200D
    SKIN_TONES = range(0x1F3FB, 0x1F400)
    REGIONAL = range(0x1F1E6, 0x1F200)

    def __init__(self, intervals: Iterable[tuple[int, int]]):
        merged: list[list[int]] = []
        for lo, hi in sorted(intervals):
            if lo > hi:
                raise ValueError(f"bad interval {lo:X}-{hi:X}")
            if merged and lo <= merged[-1][1] + 1:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        self._lo = [m[0] for m in merged]
        self._hi = [m[1] for m in merged]

    @classmethod
    def parse(cls, text: str) -> "EmojiTable":
        intervals = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            lo, _, hi = line.partition("-")
            intervals.append((int(lo, 16), int(hi or lo, 16)))
        return cls(intervals)

    @classmethod
    def from_file(cls, path: str | Path) -> "EmojiTable":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def __contains__(self, ch: str) -> bool:
        cp = ord(ch)
        i = bisect.bisect_right(self._lo, cp) - 1
        return i >= 0 and cp <= self._hi[i]


@lru_cache(maxsize=1)
def default_emoji_table() -> EmojiTable:
    text = resources.files("mmsarc").joinpath("data/emoji_ranges.txt").read_text("utf-8")
    return EmojiTable.parse(text)


# --------------------------------------------------------------------------
# tokenization

URL_RE = re.compile(r"(?:https?://|www\.)[^\s<>\"]+", re.IGNORECASE)
MENTION_RE = re.compile(r"(?<![\w@])@\w+")
HASHTAG_RE = re.compile(r"#(\w+)")
WORD_RE = re.compile(r"[^\W\d_]+(?:['’][^\W\d_]+)*")

WORD, HASHTAG, EMOJI = "word", "hashtag", "emoji"


def _emoji_end(text: str, i: int, table: EmojiTable) -> int:
    """Index one past the emoji sequence starting at ``text[i]``."""
    n = len(text)
    if ord(text[i]) in EmojiTable.REGIONAL:
        # flags are pairs of regional indicators
        if i + 1 < n and ord(text[i + 1]) in EmojiTable.REGIONAL:
            return i + 2
        return i + 1
    j = i + 1
    while j < n:
        cp = ord(text[j])
        if cp == EmojiTable.VARIATION_SELECTOR or cp in EmojiTable.SKIN_TONES:
            j += 1
        elif cp == EmojiTable.JOINER and j + 1 < n and text[j + 1] in table:
            j += 2
        else:
            break
    return j


def token_stream(raw_text: str, table: EmojiTable | None = None) -> list[tuple[str, str]]:
    """Ordered ``(kind, token)`` pairs for all words, hashtags and emojis.

    URLs and @-mentions are consumed and dropped so that their pieces never
    surface as words.  Anything else that is not a word, hashtag or emoji
    (punctuation, digits, whitespace) is discarded.
    """
    table = table or default_emoji_table()
    skip = [False] * len(raw_text)
    for rx in (URL_RE, MENTION_RE):
        for m in rx.finditer(raw_text):
            for k in range(m.start(), m.end()):
                skip[k] = True

    out: list[tuple[str, str]] = []
    i, n = 0, len(raw_text)
    while i < n:
        if skip[i]:
            i += 1
            continue
        ch = raw_text[i]
        if ch in table:
            j = _emoji_end(raw_text, i, table)
            out.append((EMOJI, raw_text[i:j]))
            i = j
            continue
        if ch == "#":
            m = HASHTAG_RE.match(raw_text, i)
            if m:
                out.append((HASHTAG, m.group(1)))
                i = m.end()
                continue
        m = WORD_RE.match(raw_text, i)
        if m and not (i > 0 and raw_text[i - 1].isalnum() and not skip[i - 1]):
            out.append((WORD, m.group(0)))
            i = m.end()
            continue
        i += 1
    return out


def tokenize(raw_text: str, table: EmojiTable | None = None) -> tuple[list[str], list[str], list[str]]:
    """Split text into (words, hashtags, emojis).

    >>> tokenize("rubbish weather #liverpool \\U0001F612")
    (['rubbish', 'weather'], ['liverpool'], ['😒'])
    """
    words, tags, emojis = [], [], []
    sink = {WORD: words, HASHTAG: tags, EMOJI: emojis}
    for kind, tok in token_stream(raw_text, table):
        sink[kind].append(tok)
    return words, tags, emojis


# --------------------------------------------------------------------------
# data model


@dataclass(frozen=True)
class Post:
    id: str
    platform: Platform
    raw_text: str
    words: tuple[str, ...] = ()
    hashtags: tuple[str, ...] = ()
    emojis: tuple[str, ...] = ()
    image_ids: tuple[str, ...] = ()
    label: Label = Label.UNLABELED
    # tags from a platform field separate from the text (Tumblr)
    field_tags: tuple[str, ...] = ()

    @classmethod
    def from_text(
        cls,
        id: str,
        platform: Platform | str,
        text: str,
        tags: Sequence[str] = (),
        image_ids: Sequence[str] = (),
        label: Label | str = Label.UNLABELED,
        table: EmojiTable | None = None,
    ) -> "Post":
        platform = Platform(platform)
        words, hashtags, emojis = tokenize(text, table)
        extra = tuple(t.lstrip("#") for t in tags)
        seen = {h.lower() for h in hashtags}
        # inline tags already carry IG/TW hashtags; only add what is new
        hashtags += [t for t in extra if t.lower() not in seen]
        return cls(
            id=str(id),
            platform=platform,
            raw_text=text,
            words=tuple(words),
            hashtags=tuple(hashtags),
            emojis=tuple(emojis),
            image_ids=tuple(image_ids),
            label=Label(label),
            field_tags=extra,
        )

    def tokens(self) -> list[str]:
        """Words, hashtags and emojis in text order, field tags last.

        Hashtags keep their ``#`` so ``#rain`` and ``rain`` stay distinct.
        """
        stream = token_stream(self.raw_text)
        out = [("#" + t if k == HASHTAG else t) for k, t in stream]
        inline = {t.lower() for k, t in stream if k == HASHTAG}
        out += ["#" + t for t in self.field_tags if t.lower() not in inline]
        return out

    def text_tokens(self) -> list[str]:
        """Words, bare hashtags and emojis: the units lexicon features see."""
        return [t[1:] if t.startswith("#") and len(t) > 1 else t for t in self.tokens()]

    def check_image_bounds(self) -> bool:
        lo, hi = IMAGE_BOUNDS[self.platform]
        n = len(self.image_ids)
        return n >= lo and (hi is None or n <= hi)

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "platform": self.platform.value,
            "text": self.raw_text,
            "tags": list(self.field_tags),
            "image_ids": list(self.image_ids),
            "label": self.label.value,
        }


def post_from_record(rec: dict, table: EmojiTable | None = None) -> Post:
    return Post.from_text(
        id=rec["id"],
        platform=rec["platform"],
        text=rec.get("text") or "",
        tags=rec.get("tags") or (),
        image_ids=rec.get("image_ids") or (),
        label=rec.get("label") or Label.UNLABELED,
        table=table,
    )


def read_corpus(path: str | Path, table: EmojiTable | None = None) -> list[Post]:
    posts = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                posts.append(post_from_record(json.loads(line), table))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad post record ({exc})") from exc
    return posts


def write_corpus(posts: Iterable[Post], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in posts:
            fh.write(json.dumps(p.to_record(), ensure_ascii=False, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# filtering


@dataclass(frozen=True)
class FilterConfig:
    min_regular_words: int = 4
    banned_tag_substrings: tuple[str, ...] = ("someecards",)
    collection_tags: tuple[str, ...] = ("sarcasm", "sarcastic")
    # a link is internal when its host is, or is a subdomain of, one of these
    internal_link_allowlist: tuple[str, ...] = (
        "instagram.com",
        "instagr.am",
        "tumblr.com",
        "twitter.com",
        "t.co",
        "twimg.com",
    )

    def __post_init__(self):
        if self.min_regular_words < 0:
            raise ValueError("min_regular_words must be >= 0")
        if not self.collection_tags:
            raise ValueError("collection_tags must be non-empty")


class RejectReason(str, enum.Enum):
    NO_IMAGE = "no_image"
    MISSING_IMAGE = "missing_image"
    MENTION = "mention"
    EXTERNAL_LINK = "external_link"
    COLLECTION_WORD = "collection_word"
    COLLECTION_TAG_IN_SENTENCE = "collection_tag_in_sentence"
    BANNED_TAG = "banned_tag"
    TOO_FEW_WORDS = "too_few_words"


@dataclass(frozen=True)
class Verdict:
    keep: bool
    reason: RejectReason | None = None

    def __str__(self):
        return "keep" if self.keep else f"reject:{self.reason.value}"


KEEP = Verdict(True)


def _host(url: str) -> str:
    if not url.lower().startswith(("http://", "https://")):
        url = "http://" + url
    return (urlsplit(url).hostname or "").lower()


def is_internal_link(url: str, allowlist: Sequence[str]) -> bool:
    host = _host(url)
    return any(host == a or host.endswith("." + a) for a in allowlist)


def filter_post(
    p: Post, cfg: FilterConfig = FilterConfig(), available_images: set[str] | None = None
) -> Verdict:
    """Apply the four corpus filters in fixed order; report the first failure.

    ``available_images``, when given, is the set of image ids that could
    actually be retrieved; any other reference counts as missing.
    """
    # 1. images
    if not p.image_ids:
        return Verdict(False, RejectReason.NO_IMAGE)
    if available_images is not None and any(i not in available_images for i in p.image_ids):
        return Verdict(False, RejectReason.MISSING_IMAGE)

    # 2. context that lives outside the post
    if MENTION_RE.search(p.raw_text):
        return Verdict(False, RejectReason.MENTION)
    for m in URL_RE.finditer(p.raw_text):
        if not is_internal_link(m.group(0), cfg.internal_link_allowlist):
            return Verdict(False, RejectReason.EXTERNAL_LINK)

    # 3. posts that talk about sarcasm explicitly
    coll = {t.lower() for t in cfg.collection_tags}
    if any(w.lower() in coll for w in p.words):
        return Verdict(False, RejectReason.COLLECTION_WORD)
    seen_collection_tag = False
    for kind, tok in token_stream(p.raw_text):
        if kind == HASHTAG and tok.lower() in coll:
            seen_collection_tag = True
        elif kind == WORD and seen_collection_tag:
            return Verdict(False, RejectReason.COLLECTION_TAG_IN_SENTENCE)

    # 4. ecards / memes, and too little text
    tags = [t.lower() for t in p.hashtags]
    if any(b.lower() in t for t in tags for b in cfg.banned_tag_substrings):
        return Verdict(False, RejectReason.BANNED_TAG)
    if len(p.words) < cfg.min_regular_words:
        return Verdict(False, RejectReason.TOO_FEW_WORDS)
    return KEEP


def strip_collection_artifacts(p: Post, cfg: FilterConfig = FilterConfig()) -> Post:
    """Drop the collection hashtags and internal links from a kept post."""
    coll = {t.lower() for t in cfg.collection_tags}

    def drop_link(m: re.Match) -> str:
        return "" if is_internal_link(m.group(0), cfg.internal_link_allowlist) else m.group(0)

    def drop_tag(m: re.Match) -> str:
        return "" if m.group(1).lower() in coll else m.group(0)

    text = URL_RE.sub(drop_link, p.raw_text)
    text = HASHTAG_RE.sub(drop_tag, text)
    text = re.sub(r"[ \t]{2,}", " ", text).strip()
    return replace(
        p,
        raw_text=text,
        hashtags=tuple(h for h in p.hashtags if h.lower() not in coll),
        field_tags=tuple(h for h in p.field_tags if h.lower() not in coll),
    )


# --------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class CorpusStats:
    avg_words: float
    avg_emojis: float
    avg_tags: float
    n_posts: int
    pct_with_text: float
    pct_with_images: float
    pct_with_both: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def corpus_stats(posts: Sequence[Post]) -> CorpusStats:
    n = len(posts)
    if n == 0:
        raise EmptyCorpusError("corpus is empty")
    has_text = [bool(p.words or p.hashtags or p.emojis) for p in posts]
    has_img = [bool(p.image_ids) for p in posts]
    both = sum(t and i for t, i in zip(has_text, has_img))
    return CorpusStats(
        avg_words=sum(len(p.words) for p in posts) / n,
        avg_emojis=sum(len(p.emojis) for p in posts) / n,
        avg_tags=sum(len(p.hashtags) for p in posts) / n,
        n_posts=n,
        pct_with_text=100.0 * sum(has_text) / n,
        pct_with_images=100.0 * sum(has_img) / n,
        pct_with_both=100.0 * both / n,
    )
