"""bitextqc: parallel-corpus quality toolkit.

Deduplicates and filters noisy bitext by cross-lingual sentence similarity,
scores translation quality with a five-metric suite, and runs a review
service for curating gold test sets.
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    CorpusStats,
    DiscrepancyLabel,
    ScoredPair,
    SentencePair,
    SimilarityThreshold,
    clamp_similarity,
)
