"""Embedding providers, cosine scoring and threshold filtering.

The real embedding model lives out-of-process behind RemoteProvider's
JSON-over-HTTP protocol; MockProvider is a deterministic character-trigram
stand-in that makes every pipeline test reproducible without a neural
network.
"""
from __future__ import annotations

import concurrent.futures
import hashlib
import logging
import sqlite3
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
import requests

from .errors import ConfigError, ProviderError, ScoringError
from .model import ScoredPair, SentencePair, SimilarityThreshold, clamp_similarity

log = logging.getLogger(__name__)

DEFAULT_MOCK_DIM = 256
DEFAULT_BATCH_LIMIT = 64
DEFAULT_RETRIES = 3
DEFAULT_BACKOFF_SECONDS = 0.5

# Published hash constants for the mock provider: an n-gram of code points
# (c1..cn) maps to bucket fmix64(c1*P1 ^ c2*P2 ^ c3*P3) % dim. P1..P3 are the
# xxhash64 primes, the finalizer is murmur3's fmix64. Fixed for all time so
# mock scores are bit-stable across platforms and releases.
_P1 = 0x9E3779B185EBCA87
_P2 = 0xC2B2AE3D27D4EB4F
_P3 = 0x165667B19E3779F9
_MIX = 0xFF51AFD7ED558CCD
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Embedding:
    """Fixed-dimension real vector; entries must be finite."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("embedding must be a non-empty 1-d vector")
        if not np.isfinite(values).all():
            raise ValueError("embedding contains non-finite entries")

    @property
    def dim(self) -> int:
        return int(self.values.size)


class EmbeddingProvider(ABC):
    """Maps batches of texts to embeddings.

    Implementations are deterministic within a run (identical text, identical
    vector), return one embedding per input text in order, and emit a single
    fixed dimension.
    """

    provider_id: str
    dim: int
    batch_limit: int

    @abstractmethod
    def embed_batch(self, texts: Sequence[str]) -> list[Embedding]:
        raise NotImplementedError

    def embed_matrix(self, texts: Sequence[str]) -> np.ndarray:
        """Batch embeddings as an (n, dim) float64 matrix; the bulk-scoring
        fast path. The default just stacks embed_batch."""
        if not texts:
            return np.empty((0, self.dim), dtype=np.float64)
        return np.stack([emb.values for emb in self.embed_batch(texts)])


def embed_batch(texts: Sequence[str], provider: EmbeddingProvider) -> list[Embedding]:
    """Validated batch embedding: enforces the batch limit and the fixed dim."""
    if len(texts) > provider.batch_limit:
        raise ValueError(
            f"batch too large: {len(texts)} texts exceeds provider limit {provider.batch_limit}"
        )
    embeddings = provider.embed_batch(texts)
    if len(embeddings) != len(texts):
        raise ProviderError(
            f"{provider.provider_id}: returned {len(embeddings)} embeddings for {len(texts)} texts"
        )
    for emb in embeddings:
        if emb.dim != provider.dim:
            raise ConfigError(
                f"{provider.provider_id}: dimension mismatch, expected {provider.dim} got {emb.dim}"
            )
    return embeddings


def _mix64(h: int) -> int:
    h = (h ^ (h >> 33)) * _MIX & _MASK64
    return h ^ (h >> 29)


def mock_gram_bucket(gram: str, dim: int) -> int:
    """Bucket index for one character n-gram (n <= 3) under the mock hash."""
    primes = (_P1, _P2, _P3)
    h = 0
    for cp, prime in zip(gram, primes):
        h ^= ord(cp) * prime & _MASK64
    return _mix64(h) % dim


class MockProvider(EmbeddingProvider):
    """Deterministic trigram-count embeddings for tests and dry runs.

    Character trigrams of the text are hashed into `dim` buckets; the count
    vector is L2-normalized. Texts shorter than 3 characters fall back to
    their 1- and 2-grams so nothing embeds to a zero vector.
    """

    def __init__(self, dim: int = DEFAULT_MOCK_DIM, batch_limit: int = 4096):
        if dim <= 0:
            raise ConfigError(f"dim must be positive, got {dim}")
        self.dim = dim
        self.batch_limit = batch_limit
        self.provider_id = f"mock-trigram-v1-d{dim}"

    def _buckets(self, text: str) -> np.ndarray:
        cps = np.frombuffer(text.encode("utf-32-le"), dtype=np.uint32).astype(np.uint64)
        if cps.size >= 3:
            h = (cps[:-2] * _P1) ^ (cps[1:-1] * _P2) ^ (cps[2:] * _P3)
        else:
            h1 = cps * _P1
            h2 = (cps[:-1] * _P1) ^ (cps[1:] * _P2)
            h = np.concatenate([h1, h2])
        h = (h ^ (h >> np.uint64(33))) * np.uint64(_MIX)
        h = h ^ (h >> np.uint64(29))
        return (h % np.uint64(self.dim)).astype(np.int64)

    def embed_one(self, text: str) -> Embedding:
        if not text:
            raise ScoringError("cannot embed empty text")
        counts = np.bincount(self._buckets(text), minlength=self.dim).astype(np.float64)
        counts /= np.linalg.norm(counts)
        return Embedding(counts)

    def embed_batch(self, texts: Sequence[str]) -> list[Embedding]:
        matrix = self.embed_matrix(texts)
        return [Embedding(matrix[i]) for i in range(matrix.shape[0])]

    def embed_matrix(self, texts: Sequence[str]) -> np.ndarray:
        """One vectorized pass over the whole batch: code points of all texts
        are concatenated, trigram starts crossing text boundaries are masked
        out, and counts land in per-text bucket rows via a single bincount."""
        if not texts:
            return np.empty((0, self.dim), dtype=np.float64)
        if any(len(t) < 3 for t in texts):
            # short-text fallback path is per-text (rare in real corpora)
            return np.stack([self.embed_one(t).values for t in texts])
        dim = np.uint64(self.dim)
        cps = np.frombuffer("".join(texts).encode("utf-32-le"), dtype=np.uint32).astype(np.uint64)
        lengths = np.fromiter((len(t) for t in texts), dtype=np.int64, count=len(texts))
        ends = np.cumsum(lengths)
        h = (cps[:-2] * _P1) ^ (cps[1:-1] * _P2) ^ (cps[2:] * _P3)
        h = (h ^ (h >> np.uint64(33))) * np.uint64(_MIX)
        h = h ^ (h >> np.uint64(29))
        buckets = (h % dim).astype(np.int64)
        # trigram start positions 0..total-3; owner = index of containing text
        starts = np.arange(cps.size - 2, dtype=np.int64)
        owner = np.searchsorted(ends, starts, side="right")
        valid = starts + 3 <= ends[owner]
        flat = owner[valid] * self.dim + buckets[valid]
        counts = np.bincount(flat, minlength=len(texts) * self.dim).astype(np.float64)
        matrix = counts.reshape(len(texts), self.dim)
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        if not (norms > 0).all():
            raise ScoringError("cannot embed empty text")
        return matrix / norms


class RemoteProvider(EmbeddingProvider):
    """Client for an out-of-process embedding service.

    Wire format: POST <url> with {"texts": [...]} returning
    {"embeddings": [[...], ...]}. Transient failures are retried with
    exponential backoff; exhausting the budget raises ProviderError.
    """

    def __init__(
        self,
        url: str,
        dim: int,
        batch_limit: int = DEFAULT_BATCH_LIMIT,
        retries: int = DEFAULT_RETRIES,
        backoff_seconds: float = DEFAULT_BACKOFF_SECONDS,
        timeout_seconds: float = 30.0,
    ):
        if not url:
            raise ConfigError("remote provider requires a url")
        if dim <= 0 or batch_limit <= 0:
            raise ConfigError("remote provider dim and batch limit must be positive")
        self.url = url
        self.dim = dim
        self.batch_limit = batch_limit
        self.retries = retries
        self.backoff_seconds = backoff_seconds
        self.timeout_seconds = timeout_seconds
        self.provider_id = f"remote:{url}#d{dim}"

    def embed_batch(self, texts: Sequence[str]) -> list[Embedding]:
        if not texts:
            return []
        payload = {"texts": list(texts)}
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                delay = self.backoff_seconds * (2 ** (attempt - 1))
                log.warning("provider retry %d/%d in %.1fs: %s", attempt, self.retries, delay, last_error)
                time.sleep(delay)
            try:
                response = requests.post(self.url, json=payload, timeout=self.timeout_seconds)
                if response.status_code >= 500:
                    last_error = ProviderError(f"server returned {response.status_code}")
                    continue
                response.raise_for_status()
                body = response.json()
                vectors = body["embeddings"]
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_error = exc
                continue
            if len(vectors) != len(texts):
                raise ProviderError(
                    f"{self.provider_id}: {len(vectors)} embeddings for {len(texts)} texts"
                )
            embeddings = [Embedding(np.asarray(v, dtype=np.float64)) for v in vectors]
            for emb in embeddings:
                if emb.dim != self.dim:
                    raise ConfigError(
                        f"{self.provider_id}: dimension mismatch, expected {self.dim} got {emb.dim}"
                    )
            return embeddings
        raise ProviderError(f"{self.provider_id}: unreachable after {self.retries} retries: {last_error}")


def cosine(a: Embedding, b: Embedding) -> float:
    """Cosine of the angle between two embeddings, clamped into [-1, 1].

    Identical vectors return exactly 1.0 (sqrt rounding would otherwise make
    self-similarity land a couple of ulps under 1).
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    norm_a = float(np.linalg.norm(a.values))
    norm_b = float(np.linalg.norm(b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("undefined similarity: zero vector")
    if a.values is b.values or np.array_equal(a.values, b.values):
        return 1.0
    value = float(np.dot(a.values, b.values)) / (norm_a * norm_b)
    return min(1.0, max(-1.0, value))


def score_pair(pair: SentencePair, provider: EmbeddingProvider) -> ScoredPair:
    """Similarity of a pair's two sides under the provider, clamped to [0, 1]."""
    src_emb, tgt_emb = embed_batch([pair.source_text, pair.target_text], provider)
    similarity = clamp_similarity(cosine(src_emb, tgt_emb))
    return ScoredPair(pair=pair, similarity=similarity, scorer_id=provider.provider_id)


class ScoreCache:
    """On-disk pair-score cache keyed by (provider_id, text digests).

    Backed by sqlite in WAL mode: concurrent readers, serialized writes.
    Re-running with a new threshold reuses cached scores instead of
    re-embedding the corpus.
    """

    def __init__(self, path: str):
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.execute(
            "CREATE TABLE IF NOT EXISTS scores (key BLOB PRIMARY KEY, score REAL NOT NULL)"
        )
        self._conn.commit()
        self._write_lock = threading.Lock()

    @staticmethod
    def key(provider_id: str, pair: SentencePair) -> bytes:
        preimage = "\x1f".join((provider_id, pair.source_text, pair.target_text))
        return hashlib.blake2b(preimage.encode("utf-8"), digest_size=16).digest()

    def get(self, key: bytes) -> float | None:
        row = self._conn.execute("SELECT score FROM scores WHERE key = ?", (key,)).fetchone()
        return None if row is None else float(row[0])

    def put_many(self, items: Iterable[tuple[bytes, float]]) -> None:
        with self._write_lock:
            self._conn.executemany(
                "INSERT OR REPLACE INTO scores (key, score) VALUES (?, ?)", list(items)
            )
            self._conn.commit()

    def close(self) -> None:
        self._conn.close()


def _score_batch(
    batch: list[SentencePair],
    provider: EmbeddingProvider,
    cache: ScoreCache | None,
) -> list[ScoredPair | tuple[SentencePair, Exception]]:
    """Score one batch of pairs; per-pair failures come back as (pair, error)."""
    results: list[ScoredPair | tuple[SentencePair, Exception]] = [None] * len(batch)  # type: ignore[list-item]
    to_embed: list[int] = []
    keys: list[bytes | None] = [None] * len(batch)
    for i, pair in enumerate(batch):
        if cache is not None:
            keys[i] = ScoreCache.key(provider.provider_id, pair)
            hit = cache.get(keys[i])
            if hit is not None:
                results[i] = ScoredPair(pair=pair, similarity=hit, scorer_id=provider.provider_id)
                continue
        to_embed.append(i)
    if to_embed:
        texts: list[str] = []
        for i in to_embed:
            texts.append(batch[i].source_text)
            texts.append(batch[i].target_text)
        if len(texts) > provider.batch_limit:
            raise ValueError(
                f"batch too large: {len(texts)} texts exceeds provider limit {provider.batch_limit}"
            )
        matrix = provider.embed_matrix(texts)
        if matrix.shape != (len(texts), provider.dim):
            raise ConfigError(
                f"{provider.provider_id}: expected {(len(texts), provider.dim)} matrix, got {matrix.shape}"
            )
        src_rows = matrix[0::2]
        tgt_rows = matrix[1::2]
        norms_src = np.linalg.norm(src_rows, axis=1)
        norms_tgt = np.linalg.norm(tgt_rows, axis=1)
        usable = (
            np.isfinite(matrix).all(axis=1)[0::2]
            & np.isfinite(matrix).all(axis=1)[1::2]
            & (norms_src > 0.0)
            & (norms_tgt > 0.0)
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            similarities = np.clip(
                (src_rows * tgt_rows).sum(axis=1) / (norms_src * norms_tgt), 0.0, 1.0
            )
        fresh: list[tuple[bytes, float]] = []
        for slot, i in enumerate(to_embed):
            pair = batch[i]
            if not usable[slot]:
                results[i] = (pair, ScoringError(f"pair {pair.id}: undefined similarity"))
                continue
            similarity = float(similarities[slot])
            results[i] = ScoredPair(pair=pair, similarity=similarity, scorer_id=provider.provider_id)
            if cache is not None and keys[i] is not None:
                fresh.append((keys[i], similarity))
        if cache is not None and fresh:
            cache.put_many(fresh)
    return results


def iter_scored(
    pairs: Iterable[SentencePair],
    provider: EmbeddingProvider,
    jobs: int = 1,
    cache: ScoreCache | None = None,
    on_unscored: Callable[[SentencePair, Exception], None] | None = None,
) -> Iterator[ScoredPair]:
    """Score a pair stream in input order.

    Batches are sized so one provider call embeds both sides of every pair in
    the batch. With jobs > 1 disjoint batches run concurrently but results
    merge back in input order, so output is independent of the job count.
    Pair-level scoring failures are routed to on_unscored instead of being
    yielded; provider failures propagate and abort the stream.
    """
    pairs_per_batch = max(1, provider.batch_limit // 2)

    def batches() -> Iterator[list[SentencePair]]:
        batch: list[SentencePair] = []
        for pair in pairs:
            batch.append(pair)
            if len(batch) >= pairs_per_batch:
                yield batch
                batch = []
        if batch:
            yield batch

    def emit(results: list[ScoredPair | tuple[SentencePair, Exception]]) -> Iterator[ScoredPair]:
        for result in results:
            if isinstance(result, ScoredPair):
                yield result
            else:
                pair, exc = result
                log.warning("unscored pair %s: %s", pair.id, exc)
                if on_unscored is not None:
                    on_unscored(pair, exc)

    if jobs <= 1:
        for batch in batches():
            yield from emit(_score_batch(batch, provider, cache))
        return

    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
        pending: list[concurrent.futures.Future] = []
        source = batches()
        exhausted = False
        while pending or not exhausted:
            while not exhausted and len(pending) < jobs * 2:
                batch = next(source, None)
                if batch is None:
                    exhausted = True
                    break
                pending.append(pool.submit(_score_batch, batch, provider, cache))
            if pending:
                yield from emit(pending.pop(0).result())


def filter_by_threshold(
    scored: Iterable[ScoredPair], tau: SimilarityThreshold | float
) -> tuple[list[ScoredPair], list[ScoredPair]]:
    """Partition scored pairs into (kept, rejected) preserving input order.

    The boundary is inclusive: similarity >= tau is kept.
    """
    threshold = tau.tau if isinstance(tau, SimilarityThreshold) else SimilarityThreshold(tau).tau
    kept: list[ScoredPair] = []
    rejected: list[ScoredPair] = []
    for sp in scored:
        (kept if sp.similarity >= threshold else rejected).append(sp)
    return kept, rejected
