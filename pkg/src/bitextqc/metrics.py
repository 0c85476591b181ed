"""Corpus-level translation quality metrics.

Five scores, all reported on a 0-100 scale:

  bleu_corpus   modified n-gram precision (n=1..4) with brevity penalty,
                clipped counts aggregated over the whole corpus.
  chrf          character n-gram F-score (orders 1..6, beta=2), whitespace
                removed, macro-averaged over segments.
  chrf_pp       chrf extended with word 1- and 2-grams averaged together
                with the character orders.
  meteor_simple exact-match unigram METEOR: harmonic precision/recall mean
                scaled by a fragmentation penalty over aligned chunks.
  sbert_score   mean clamped cosine similarity under an embedding provider.

Tokenization everywhere is whitespace splitting after normalize(); no
stemming, synonymy or punctuation handling (none exists for Marathi in this
scope), which makes every value reproducible from the text alone.
"""
from __future__ import annotations

import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import BitextError, FormatError
from .ingest import normalize
from .model import clamp_similarity
from .similarity import EmbeddingProvider, cosine, embed_batch

log = logging.getLogger(__name__)

BLEU_MAX_ORDER = 4
BLEU_EPSILON = 0.1
CHRF_CHAR_ORDER = 6
CHRF_BETA = 2.0
CHRFPP_WORD_ORDER = 2
METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5

# Exact minimal-fragmentation search gives up beyond this many visited
# states (pathological repetition) and falls back to a wide beam.
_CHUNK_SEARCH_BUDGET = 250_000
_CHUNK_BEAM_WIDTH = 64


class MetricError(BitextError):
    """A metric failed; the message names which one."""


@dataclass(frozen=True)
class EvalSet:
    """Aligned (hypothesis, reference) segments for evaluation."""

    items: tuple[tuple[str, str], ...]
    name: str = "evalset"

    def __post_init__(self):
        if not self.items:
            raise ValueError("empty evaluation set")
        object.__setattr__(
            self,
            "items",
            tuple((normalize(h), normalize(r)) for h, r in self.items),
        )

    def __len__(self) -> int:
        return len(self.items)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]], name: str = "evalset") -> "EvalSet":
        return cls(items=tuple(pairs), name=name)

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "EvalSet":
        """Load from JSONL with "hyp"/"ref" fields; "src"/"tgt" are accepted
        as aliases so exported gold files evaluate directly."""
        items: list[tuple[str, str]] = []
        with open(path, "r", encoding="utf-8") as handle:
            for line_no, raw in enumerate(handle, start=1):
                line = raw.strip()
                if not line:
                    continue
                obj = json.loads(line)
                if "hyp" in obj and "ref" in obj:
                    items.append((str(obj["hyp"]), str(obj["ref"])))
                elif "src" in obj and "tgt" in obj:
                    items.append((str(obj["src"]), str(obj["tgt"])))
                else:
                    raise FormatError(f"{path}:{line_no}: need 'hyp'/'ref' (or 'src'/'tgt') fields")
        return cls(items=tuple(items), name=Path(path).stem)


@dataclass(frozen=True)
class MetricReport:
    """Corpus-level scores on the 0-100 scale plus the item count."""

    bleu: float
    meteor: float
    chrf: float
    chrf_pp: float
    sbert_score: float
    n_items: int

    def to_json_obj(self) -> dict:
        return {
            "bleu": round(self.bleu, 3),
            "meteor": round(self.meteor, 3),
            "chrf": round(self.chrf, 3),
            "chrf_pp": round(self.chrf_pp, 3),
            "sbert_score": round(self.sbert_score, 3),
            "n_items": self.n_items,
        }


def _word_ngrams(tokens: Sequence[str], order: int) -> Counter:
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def _char_ngrams(text: str, order: int) -> Counter:
    return Counter(text[i : i + order] for i in range(len(text) - order + 1))


def bleu_corpus(eval_set: EvalSet, max_n: int = BLEU_MAX_ORDER, smoothing: str = "add-epsilon") -> float:
    """Corpus BLEU: geometric mean of clipped n-gram precisions times the
    brevity penalty exp(min(0, 1 - ref_len/hyp_len)), scaled to [0, 100].

    smoothing="add-epsilon" substitutes 0.1 for zero clipped counts (corpus
    BLEU on desk-scale sets hits zero 4-gram matches constantly);
    smoothing="none" lets a zero factor zero the whole score.
    """
    if smoothing not in ("add-epsilon", "none"):
        raise ValueError(f"unknown smoothing: {smoothing!r}")
    correct = [0] * max_n
    total = [0] * max_n
    hyp_len = 0
    ref_len = 0
    for hyp, ref in eval_set.items:
        hyp_tokens = hyp.split()
        ref_tokens = ref.split()
        hyp_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        for n in range(1, max_n + 1):
            hyp_ngrams = _word_ngrams(hyp_tokens, n)
            if not hyp_ngrams:
                continue
            ref_ngrams = _word_ngrams(ref_tokens, n)
            total[n - 1] += sum(hyp_ngrams.values())
            correct[n - 1] += sum((hyp_ngrams & ref_ngrams).values())
    if hyp_len == 0:
        log.warning("bleu: empty hypothesis corpus, score is 0")
        return 0.0
    if any(t == 0 for t in total):
        return 0.0
    log_sum = 0.0
    for n in range(max_n):
        numerator = correct[n]
        if numerator == 0:
            if smoothing == "none":
                return 0.0
            numerator = BLEU_EPSILON
        log_sum += math.log(numerator / total[n])
    brevity = math.exp(min(0.0, 1.0 - ref_len / hyp_len))
    return 100.0 * brevity * math.exp(log_sum / max_n)


def chrf_precision_recall(
    hyp: str, ref: str, char_n: int = CHRF_CHAR_ORDER, word_n: int = 0
) -> tuple[float, float]:
    """Averaged chrF precision and recall for one segment.

    Each is averaged over every n-gram order where both sides produce at
    least one n-gram; character n-grams are taken over the whitespace-
    stripped segment, word n-grams over whitespace tokens. Returns (0, 0)
    when no order is usable (an empty side).
    """
    stats: list[tuple[int, int, int]] = []
    hyp_chars = hyp.replace(" ", "")
    ref_chars = ref.replace(" ", "")
    for n in range(1, char_n + 1):
        h = _char_ngrams(hyp_chars, n)
        r = _char_ngrams(ref_chars, n)
        stats.append((sum(h.values()), sum(r.values()), sum((h & r).values())))
    if word_n > 0:
        hyp_tokens = hyp.split()
        ref_tokens = ref.split()
        for n in range(1, word_n + 1):
            h = _word_ngrams(hyp_tokens, n)
            r = _word_ngrams(ref_tokens, n)
            stats.append((sum(h.values()), sum(r.values()), sum((h & r).values())))
    precision_sum = 0.0
    recall_sum = 0.0
    effective = 0
    for hyp_count, ref_count, match in stats:
        if hyp_count > 0 and ref_count > 0:
            precision_sum += match / hyp_count
            recall_sum += match / ref_count
            effective += 1
    if effective == 0:
        return 0.0, 0.0
    return precision_sum / effective, recall_sum / effective


def _chrf_segment(hyp: str, ref: str, char_n: int, beta: float, word_n: int) -> float:
    """Single-segment chrF in [0, 1]."""
    precision, recall = chrf_precision_recall(hyp, ref, char_n, word_n)
    if precision == 0.0 and recall == 0.0:
        if not hyp.replace(" ", "") or not ref.replace(" ", ""):
            log.warning("chrf: segment with an empty side scores 0")
        return 0.0
    denominator = beta * beta * precision + recall
    if denominator == 0.0:
        return 0.0
    return (1.0 + beta * beta) * precision * recall / denominator


def chrf(
    eval_set: EvalSet,
    char_n: int = CHRF_CHAR_ORDER,
    beta: float = CHRF_BETA,
    word_n: int = 0,
) -> float:
    """Macro-averaged chrF over segments, scaled to [0, 100]."""
    total = math.fsum(
        _chrf_segment(hyp, ref, char_n, beta, word_n) for hyp, ref in eval_set.items
    )
    return 100.0 * total / len(eval_set)


def chrf_pp(eval_set: EvalSet) -> float:
    """chrF++: chrF with word unigrams and bigrams joined into the average."""
    return chrf(eval_set, word_n=CHRFPP_WORD_ORDER)


def match_and_chunks(hyp_tokens: Sequence[str], ref_tokens: Sequence[str]) -> tuple[int, int]:
    """Exact-match unigram alignment summary: (matches, minimal chunks).

    Each token is used at most once, so the match count is the per-symbol
    minimum of the two occurrence counts. Among all maximum alignments, the
    chunk count is the fewest maximal runs of positions contiguous in both
    sentences, found by pruned exhaustive search (with a wide deterministic
    beam beyond the node budget, which only degenerate repetition can hit).
    """
    hyp_counts = Counter(hyp_tokens)
    ref_counts = Counter(ref_tokens)
    quota = {
        token: min(count, ref_counts[token])
        for token, count in hyp_counts.items()
        if token in ref_counts
    }
    m = sum(quota.values())
    if m == 0:
        return 0, 0

    candidates: dict[str, list[int]] = defaultdict(list)
    for j, token in enumerate(ref_tokens):
        if token in quota:
            candidates[token].append(j)

    n = len(hyp_tokens)
    # remaining[i][token]: occurrences of token in hyp_tokens[i:], used to
    # decide when a position may stay unmatched without losing a match.
    remaining: list[Counter] = [Counter() for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        remaining[i] = remaining[i + 1].copy()
        if hyp_tokens[i] in quota:
            remaining[i][hyp_tokens[i]] += 1

    best = m + 1  # worst case: every match its own chunk
    used_counts: Counter = Counter()
    visited: dict[tuple[int, int, int], int] = {}
    nodes = 0

    class _Budget(Exception):
        pass

    def search(i: int, prev_j: int, used_mask: int, chunks: int) -> None:
        nonlocal best, nodes
        nodes += 1
        if nodes > _CHUNK_SEARCH_BUDGET:
            raise _Budget
        if chunks >= best:
            return
        if i == n:
            best = chunks
            return
        state = (i, prev_j, used_mask)
        seen = visited.get(state)
        if seen is not None and seen <= chunks:
            return
        visited[state] = chunks
        token = hyp_tokens[i]
        may_match = token in quota and used_counts[token] < quota[token]
        if may_match:
            ordered = candidates[token]
            # continuation first: keeps the current chunk open and lets the
            # chunks >= best bound cut everything the greedy path beats
            js = sorted(ordered, key=lambda j: (j != prev_j + 1, j))
            for j in js:
                if used_mask >> j & 1:
                    continue
                used_counts[token] += 1
                search(
                    i + 1,
                    j,
                    used_mask | (1 << j),
                    chunks + (0 if j == prev_j + 1 else 1),
                )
                used_counts[token] -= 1
        may_skip = (
            token not in quota
            or used_counts[token] + remaining[i + 1][token] >= quota[token]
        )
        if may_skip:
            search(i + 1, -2, used_mask, chunks)

    try:
        search(0, -2, 0, 0)
        return m, best
    except _Budget:
        return m, _min_chunks_beam(hyp_tokens, ref_tokens, quota, candidates, remaining, m)


def _min_chunks_beam(
    hyp_tokens: Sequence[str],
    ref_tokens: Sequence[str],
    quota: dict[str, int],
    candidates: dict[str, list[int]],
    remaining: list[Counter],
    m: int,
) -> int:
    """Deterministic beam fallback for adversarial repetition; near-optimal."""
    n = len(hyp_tokens)
    # state: (chunks, prev_j, used_mask, used_counts as frozen tuple)
    symbols = sorted(quota)
    index_of = {s: k for k, s in enumerate(symbols)}
    states: dict[tuple[int, int, tuple[int, ...]], int] = {(-2, 0, (0,) * len(symbols)): 0}
    for i in range(n):
        token = hyp_tokens[i]
        next_states: dict[tuple[int, int, tuple[int, ...]], int] = {}

        def offer(key: tuple[int, int, tuple[int, ...]], chunks: int) -> None:
            old = next_states.get(key)
            if old is None or chunks < old:
                next_states[key] = chunks

        for (prev_j, mask, counts), chunks in states.items():
            if token in quota and counts[index_of[token]] < quota[token]:
                bumped = list(counts)
                bumped[index_of[token]] += 1
                bumped_t = tuple(bumped)
                for j in candidates[token]:
                    if mask >> j & 1:
                        continue
                    offer((j, mask | (1 << j), bumped_t), chunks + (0 if j == prev_j + 1 else 1))
            if token not in quota or counts[index_of[token]] + remaining[i + 1][token] >= quota[token]:
                offer((-2, mask, counts), chunks)
        ranked = sorted(next_states.items(), key=lambda kv: (kv[1], kv[0][0], kv[0][1]))
        states = dict(ranked[:_CHUNK_BEAM_WIDTH])
    return min(states.values())


def meteor_segment(
    hyp: str,
    ref: str,
    alpha: float = METEOR_ALPHA,
    beta_frag: float = METEOR_BETA,
    gamma: float = METEOR_GAMMA,
) -> float:
    """Single-segment exact-match METEOR in [0, 1]."""
    hyp_tokens = hyp.split()
    ref_tokens = ref.split()
    if not hyp_tokens or not ref_tokens:
        return 0.0
    m, chunks = match_and_chunks(hyp_tokens, ref_tokens)
    if m == 0:
        return 0.0
    precision = m / len(hyp_tokens)
    recall = m / len(ref_tokens)
    f_mean = precision * recall / (alpha * precision + (1.0 - alpha) * recall)
    penalty = gamma * (chunks / m) ** beta_frag
    return f_mean * (1.0 - penalty)


def meteor_simple(
    eval_set: EvalSet,
    alpha: float = METEOR_ALPHA,
    beta_frag: float = METEOR_BETA,
    gamma: float = METEOR_GAMMA,
) -> float:
    """Mean segment METEOR scaled to [0, 100]."""
    total = math.fsum(
        meteor_segment(hyp, ref, alpha, beta_frag, gamma) for hyp, ref in eval_set.items
    )
    return 100.0 * total / len(eval_set)


def sbert_score(eval_set: EvalSet, provider: EmbeddingProvider) -> float:
    """Mean clamped cosine similarity of (hypothesis, reference) embeddings,
    scaled to [0, 100]. Segments with an empty side score 0."""
    similarities: list[float] = []
    texts: list[str] = []
    slots: list[int] = []
    for index, (hyp, ref) in enumerate(eval_set.items):
        if not hyp or not ref:
            log.warning("sbert_score: segment %d has an empty side, scores 0", index)
            similarities.append(0.0)
            continue
        texts.extend((hyp, ref))
        slots.append(index)
        similarities.append(0.0)
    step = max(2, provider.batch_limit - provider.batch_limit % 2)
    embeddings = []
    for start in range(0, len(texts), step):
        embeddings.extend(embed_batch(texts[start : start + step], provider))
    for k, index in enumerate(slots):
        similarities[index] = clamp_similarity(cosine(embeddings[2 * k], embeddings[2 * k + 1]))
    return 100.0 * math.fsum(similarities) / len(eval_set)


def evaluate(eval_set: EvalSet, provider: EmbeddingProvider) -> MetricReport:
    """All five metrics on the same set; failures name the offending metric."""
    values: dict[str, float] = {}
    for name, fn in (
        ("bleu", lambda: bleu_corpus(eval_set)),
        ("meteor", lambda: meteor_simple(eval_set)),
        ("chrf", lambda: chrf(eval_set)),
        ("chrf_pp", lambda: chrf_pp(eval_set)),
        ("sbert_score", lambda: sbert_score(eval_set, provider)),
    ):
        try:
            values[name] = fn()
        except Exception as exc:
            raise MetricError(f"metric {name} failed: {exc}") from exc
    return MetricReport(
        bleu=values["bleu"],
        meteor=values["meteor"],
        chrf=values["chrf"],
        chrf_pp=values["chrf_pp"],
        sbert_score=values["sbert_score"],
        n_items=len(eval_set),
    )
