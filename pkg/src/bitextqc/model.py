"""Core domain types shared by every stage of the toolkit.

All types here are immutable values after construction and safe to share
between concurrent workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

DEFAULT_TAU = 0.7
HISTOGRAM_BINS = 20


def clamp_similarity(x: float) -> float:
    """Clamp a finite similarity value into [0, 1].

    Raw cosine can be negative; downstream thresholds are defined on a
    [0, 1] scale, so negative values clamp to 0 and overshoot clamps to 1.
    """
    if not math.isfinite(x):
        raise ValueError(f"invalid score: {x!r} is not finite")
    return min(1.0, max(0.0, float(x)))


class DiscrepancyLabel(str, Enum):
    """Review labels for translation defects, plus Accurate for clean pairs."""

    NUANCE_LOSS = "NuanceLoss"
    DIFFERENT_MEANING = "DifferentMeaning"
    AMBIGUOUS = "Ambiguous"
    MISSING_CONTEXT = "MissingContext"
    SIMILAR_CONTEXT_DISTINCT_MEANING = "SimilarContextDistinctMeaning"
    ACCURATE = "Accurate"


DEFECT_LABELS = frozenset(
    label for label in DiscrepancyLabel if label is not DiscrepancyLabel.ACCURATE
)


@dataclass(frozen=True)
class SentencePair:
    """One aligned source/target sentence pair.

    Texts are expected to be normalized (see ingest.normalize) and must be
    non-empty. meta carries provenance as plain string key/values.
    """

    id: str
    source_text: str
    target_text: str
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id:
            raise ValueError("pair id must be non-empty")
        if not self.source_text or not self.target_text:
            raise ValueError(f"pair {self.id}: empty source or target text")


@dataclass(frozen=True)
class ScoredPair:
    """A pair annotated with a similarity score and the scorer that produced it.

    The score is clamped into [0, 1] at construction; non-finite input raises.
    """

    pair: SentencePair
    similarity: float
    scorer_id: str

    def __post_init__(self):
        object.__setattr__(self, "similarity", clamp_similarity(self.similarity))


@dataclass(frozen=True)
class SimilarityThreshold:
    """Retention cutoff: pairs scoring >= tau are kept (boundary inclusive)."""

    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if not (0.0 <= self.tau <= 1.0):
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")


@dataclass
class CorpusStats:
    """Counters accumulated over one filtering run.

    Invariants (checked by validate):
      total_read = duplicates_removed + scored + unscored
      scored = retained + rejected
      sum(score_histogram) = scored
    """

    total_read: int = 0
    duplicates_removed: int = 0
    scored: int = 0
    retained: int = 0
    rejected: int = 0
    unscored: int = 0
    score_histogram: list[int] = field(
        default_factory=lambda: [0] * HISTOGRAM_BINS
    )

    def observe_score(self, score: float) -> None:
        bin_index = min(int(score * HISTOGRAM_BINS), HISTOGRAM_BINS - 1)
        self.score_histogram[bin_index] += 1

    def validate(self) -> None:
        if self.total_read != self.duplicates_removed + self.scored + self.unscored:
            raise ValueError("stats: total_read != duplicates_removed + scored + unscored")
        if self.scored != self.retained + self.rejected:
            raise ValueError("stats: scored != retained + rejected")
        if sum(self.score_histogram) != self.scored:
            raise ValueError("stats: histogram does not sum to scored")

    def to_json_obj(self) -> dict:
        return {
            "total_read": self.total_read,
            "duplicates_removed": self.duplicates_removed,
            "scored": self.scored,
            "retained": self.retained,
            "rejected": self.rejected,
            "unscored": self.unscored,
            "score_histogram": list(self.score_histogram),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "CorpusStats":
        stats = cls(
            total_read=int(obj["total_read"]),
            duplicates_removed=int(obj["duplicates_removed"]),
            scored=int(obj["scored"]),
            retained=int(obj["retained"]),
            rejected=int(obj["rejected"]),
            unscored=int(obj.get("unscored", 0)),
            score_histogram=[int(c) for c in obj["score_histogram"]],
        )
        if len(stats.score_histogram) != HISTOGRAM_BINS:
            raise ValueError("stats: histogram must have 20 bins")
        return stats
