"""Crowd judgments: majority votes, text/image categories, agreement, gold sets.

Two tasks are run per post.  Task 1 shows only the text ("Is this text
sarcastic?"); task 2 shows text and image and is run only on posts the task-1
majority called non-sarcastic.  Votes are Yes / No / DontKnow.

DontKnow counts as its own category for Fleiss' kappa and as a vote in the
denominator of the Yes share used for gold thresholds, but is ignored by the
majority rule.
"""

from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Vote",
    "Task",
    "Majority",
    "Category",
    "JudgmentSet",
    "GoldSet",
    "ProtocolViolation",
    "RaggedJudgments",
    "DegenerateMarginals",
    "majority",
    "assign_category",
    "matching_percent",
    "fleiss_kappa",
    "yes_share",
    "build_gold",
    "categorize",
    "category_distribution",
    "read_judgments",
    "write_judgments",
]


class Vote(str, enum.Enum):
    YES = "yes"
    NO = "no"
    DONT_KNOW = "dont_know"

    @classmethod
    def parse(cls, s: str) -> "Vote":
        key = s.strip().lower().replace("'", "").replace(" ", "_")
        aliases = {"y": "yes", "n": "no", "dk": "dont_know", "idk": "dont_know", "i_dont_know": "dont_know"}
        return cls(aliases.get(key, key))


class Task(str, enum.Enum):
    TEXT_ONLY = "text_only"  # task 1
    TEXT_IMAGE = "text_image"  # task 2


class Majority(str, enum.Enum):
    YES = "yes"
    NO = "no"
    UNDECIDED = "undecided"


class Category(str, enum.Enum):
    TEXT_ONLY = "text_only"
    TEXT_IMAGE = "text_image"
    NOT_SARCASTIC = "not_sarcastic"
    UNDECIDED = "undecided"


class ProtocolViolation(ValueError):
    pass


class RaggedJudgments(ValueError):
    pass


class DegenerateMarginals(ValueError):
    pass


@dataclass(frozen=True)
class JudgmentSet:
    post_id: str
    task: Task
    votes: tuple[Vote, ...]

    def __post_init__(self):
        if not self.votes:
            raise ValueError(f"post {self.post_id}: no votes")
        object.__setattr__(self, "task", Task(self.task))
        object.__setattr__(self, "votes", tuple(v if isinstance(v, Vote) else Vote.parse(v) for v in self.votes))

    @classmethod
    def of(cls, post_id: str, task: Task | str, votes: str | Iterable) -> "JudgmentSet":
        """Shorthand: ``votes`` may be a string such as ``"YYNN?"`` (? = DontKnow)."""
        if isinstance(votes, str):
            votes = [{"Y": Vote.YES, "N": Vote.NO, "?": Vote.DONT_KNOW}[c] for c in votes.upper()]
        return cls(post_id, Task(task), tuple(votes))


def majority(j: JudgmentSet) -> Majority:
    c = Counter(j.votes)
    if c[Vote.YES] > c[Vote.NO]:
        return Majority.YES
    if c[Vote.NO] > c[Vote.YES]:
        return Majority.NO
    return Majority.UNDECIDED


def assign_category(task1: JudgmentSet, task2: JudgmentSet | None = None) -> Category:
    m1 = majority(task1)
    if m1 is Majority.YES:
        if task2 is not None:
            raise ProtocolViolation(
                f"post {task1.post_id}: task 2 judgments for a post task 1 found sarcastic"
            )
        return Category.TEXT_ONLY
    if m1 is Majority.NO and task2 is not None:
        m2 = majority(task2)
        if m2 is Majority.YES:
            return Category.TEXT_IMAGE
        if m2 is Majority.NO:
            return Category.NOT_SARCASTIC
    return Category.UNDECIDED


def categorize(
    task1: Sequence[JudgmentSet], task2: Sequence[JudgmentSet]
) -> dict[str, Category]:
    t2 = {j.post_id: j for j in task2}
    return {j.post_id: assign_category(j, t2.get(j.post_id)) for j in task1}


def category_distribution(categories: Mapping[str, Category]) -> dict[Category, float]:
    n = len(categories)
    if n == 0:
        raise ValueError("no categorized posts")
    c = Counter(categories.values())
    return {cat: c[cat] / n for cat in Category}


# --------------------------------------------------------------------------
# agreement


def matching_percent(sets: Sequence[JudgmentSet]) -> float:
    """Mean over objects of the share of votes equal to the modal vote, x100."""
    if not sets:
        raise ValueError("no judgments")
    shares = [Counter(j.votes).most_common(1)[0][1] / len(j.votes) for j in sets]
    return 100.0 * float(np.mean(shares))


def rating_matrix(sets: Sequence[JudgmentSet], categories: Sequence[Vote] = tuple(Vote)) -> np.ndarray:
    """Counts ``n[i, j]`` of raters putting object ``i`` in category ``j``."""
    col = {c: k for k, c in enumerate(categories)}
    m = np.zeros((len(sets), len(categories)), dtype=np.int64)
    for i, j in enumerate(sets):
        for v in j.votes:
            m[i, col[v]] += 1
    return m


def fleiss_kappa(sets: Sequence[JudgmentSet], categories: Sequence[Vote] = tuple(Vote)) -> float:
    r"""Fleiss' kappa over a fixed category set.

               P_bar - P_e
    kappa = -----------------
                1 - P_e

    P_bar averages per-object pairwise agreement
    ``(sum_j n_ij^2 - n) / (n (n - 1))``; ``P_e = sum_j p_j^2`` with ``p_j``
    the share of all ratings in category ``j``.
    """
    if not sets:
        raise ValueError("no judgments")
    counts = {len(j.votes) for j in sets}
    if len(counts) != 1:
        raise RaggedJudgments(f"objects have different numbers of votes: {sorted(counts)}")
    n = counts.pop()
    if n < 2:
        raise RaggedJudgments("need at least two votes per object")
    m = rating_matrix(sets, categories)
    p_i = ((m * m).sum(axis=1) - n) / (n * (n - 1))
    p_bar = p_i.mean()
    p_j = m.sum(axis=0) / m.sum()
    p_e = float((p_j * p_j).sum())
    if p_e == 1.0:
        raise DegenerateMarginals("all ratings fall in a single category")
    return float((p_bar - p_e) / (1.0 - p_e))


# --------------------------------------------------------------------------
# gold sets


@dataclass(frozen=True)
class GoldSet:
    threshold: float
    positives: tuple[str, ...]
    negatives: tuple[str, ...]
    balanced: bool = True

    def __post_init__(self):
        if self.balanced and len(self.positives) != len(self.negatives):
            raise ValueError("balanced gold set needs as many negatives as positives")

    @property
    def name(self) -> str:
        return f"D-{round(self.threshold * 100)}"

    def labels(self) -> dict[str, int]:
        out = {p: 1 for p in self.positives}
        out.update({n: -1 for n in self.negatives})
        return out

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "threshold": self.threshold,
            "balanced": self.balanced,
            "posts": [{"id": p, "label": "sarcastic"} for p in self.positives]
            + [{"id": n, "label": "non_sarcastic"} for n in self.negatives],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GoldSet":
        pos = tuple(x["id"] for x in d["posts"] if x["label"] == "sarcastic")
        neg = tuple(x["id"] for x in d["posts"] if x["label"] == "non_sarcastic")
        return cls(float(d["threshold"]), pos, neg, bool(d.get("balanced", True)))


THRESHOLDS = (0.5, 0.8, 1.0)


def yes_share(j: JudgmentSet) -> float:
    return sum(v is Vote.YES for v in j.votes) / len(j.votes)


def build_gold(
    categories: Mapping[str, Category],
    task2: Sequence[JudgmentSet],
    threshold: float,
    negative_pool: Sequence[str],
    seed: int = 0,
) -> GoldSet:
    """Text+Image posts with Yes share >= threshold, balanced by sampled negatives.

    Thresholds 0.5 / 0.8 / 1.0 give D-50 / D-80 / D-100.  Negatives are drawn
    without replacement from the sorted pool with a seeded generator.
    """
    if threshold not in THRESHOLDS:
        raise ValueError(f"threshold must be one of {THRESHOLDS}")
    t2 = {j.post_id: j for j in task2}
    positives = tuple(
        pid
        for pid in sorted(categories)
        if categories[pid] is Category.TEXT_IMAGE and pid in t2 and yes_share(t2[pid]) >= threshold
    )
    pool = sorted(set(negative_pool) - set(positives))
    if len(pool) < len(positives):
        raise ValueError(f"need {len(positives)} negatives, pool has {len(pool)}")
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(pool), size=len(positives), replace=False) if positives else []
    negatives = tuple(pool[i] for i in sorted(picked))
    return GoldSet(threshold, positives, negatives, balanced=True)


# --------------------------------------------------------------------------
# files


def read_judgments(path: str | Path) -> list[JudgmentSet]:
    """Line-delimited JSON: ``{"post_id": ..., "task": ..., "votes": [...]}``."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                out.append(JudgmentSet(str(rec["post_id"]), Task(rec["task"]), tuple(rec["votes"])))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad judgment record ({exc})") from exc
    return out


def write_judgments(sets: Iterable[JudgmentSet], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for j in sets:
            rec = {"post_id": j.post_id, "task": j.task.value, "votes": [v.value for v in j.votes]}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
