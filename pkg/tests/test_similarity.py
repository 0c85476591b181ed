import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bitextqc.errors import ScoringError
from bitextqc.model import ScoredPair, SentencePair, SimilarityThreshold
from bitextqc.similarity import (
    Embedding,
    EmbeddingProvider,
    MockProvider,
    ScoreCache,
    cosine,
    embed_batch,
    filter_by_threshold,
    iter_scored,
    mock_gram_bucket,
    score_pair,
)

from conftest import make_pair

# Independent reimplementation of the published mock hash (plain Python ints)
# used as the oracle for bucket-level expectations.
_P1 = 0x9E3779B185EBCA87
_P2 = 0xC2B2AE3D27D4EB4F
_P3 = 0x165667B19E3779F9
_MIX = 0xFF51AFD7ED558CCD
_MASK = (1 << 64) - 1


def oracle_bucket(gram: str, dim: int) -> int:
    h = 0
    for cp, prime in zip(gram, (_P1, _P2, _P3)):
        h ^= ord(cp) * prime & _MASK
    h = (h ^ (h >> 33)) * _MIX & _MASK
    h ^= h >> 29
    return h % dim


def oracle_trigram_buckets(text: str, dim: int) -> list[int]:
    if len(text) >= 3:
        grams = [text[i : i + 3] for i in range(len(text) - 2)]
    else:
        grams = list(text) + [text[i : i + 2] for i in range(len(text) - 1)]
    return [oracle_bucket(g, dim) for g in grams]


class FixedProvider(EmbeddingProvider):
    """Returns preset vectors per text; for clamp and failure-path tests."""

    def __init__(self, table, dim):
        self.table = table
        self.dim = dim
        self.batch_limit = 64
        self.provider_id = "fixed"
        self.calls = 0

    def embed_batch(self, texts):
        self.calls += 1
        return [Embedding(np.asarray(self.table[t], dtype=np.float64)) for t in texts]


class TestCosine:
    def test_self_similarity(self):
        e = Embedding(np.array([0.3, 0.4]))
        assert cosine(e, e) == 1.0

    def test_orthogonal(self):
        assert cosine(Embedding(np.array([1.0, 0.0])), Embedding(np.array([0.0, 1.0]))) == 0.0

    def test_analytic_forty_five_degrees(self):
        value = cosine(Embedding(np.array([1.0, 0.0])), Embedding(np.array([1.0, 1.0])))
        assert abs(value - math.sqrt(2) / 2) < 1e-9

    def test_dim_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            cosine(Embedding(np.array([1.0])), Embedding(np.array([1.0, 2.0])))

    def test_zero_vector_undefined(self):
        with pytest.raises(ValueError, match="undefined similarity"):
            cosine(Embedding(np.array([0.0, 0.0])), Embedding(np.array([1.0, 0.0])))

    @given(
        st.lists(st.floats(-5, 5), min_size=3, max_size=3),
        st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    )
    def test_symmetry_exact(self, a, b):
        va, vb = np.asarray(a), np.asarray(b)
        if np.linalg.norm(va) == 0 or np.linalg.norm(vb) == 0:
            return
        ea, eb = Embedding(va), Embedding(vb)
        assert cosine(ea, eb) == cosine(eb, ea)

    @given(
        st.lists(st.floats(-5, 5), min_size=4, max_size=4),
        st.lists(st.floats(-5, 5), min_size=4, max_size=4),
        st.floats(0.01, 100.0),
    )
    def test_scale_invariance(self, a, b, k):
        va, vb = np.asarray(a), np.asarray(b)
        if np.linalg.norm(va) == 0 or np.linalg.norm(vb) == 0:
            return
        base = cosine(Embedding(va), Embedding(vb))
        scaled = cosine(Embedding(k * va), Embedding(vb))
        assert abs(base - scaled) < 1e-9


class TestMockProvider:
    def test_deterministic(self):
        provider = MockProvider()
        a = provider.embed_one("abc")
        b = provider.embed_one("abc")
        assert np.array_equal(a.values, b.values)

    def test_identical_texts_in_batch(self):
        provider = MockProvider()
        out = embed_batch(["a", "a"], provider)
        assert np.array_equal(out[0].values, out[1].values)

    def test_empty_batch(self):
        assert embed_batch([], MockProvider()) == []

    def test_batch_too_large(self):
        provider = MockProvider()
        provider.batch_limit = 2
        with pytest.raises(ValueError, match="batch too large"):
            embed_batch(["a", "b", "c"], provider)

    def test_self_cosine_is_one(self):
        provider = MockProvider()
        emb = provider.embed_one("abcdef")
        assert cosine(emb, emb) == 1.0

    def test_buckets_match_independent_oracle(self):
        provider = MockProvider(dim=256)
        for text in ("aaaa", "zzzz", "hello world", "ab", "x"):
            expected = np.zeros(256)
            for bucket in oracle_trigram_buckets(text, 256):
                expected[bucket] += 1
            expected /= np.linalg.norm(expected)
            emb = provider.embed_one(text)
            assert np.allclose(emb.values, expected, atol=0), text

    def test_disjoint_trigrams_score_zero(self):
        # "aaaa" hashes all trigrams to one bucket, "zzzz" to another; the
        # chosen constants put them in different buckets, so cosine is 0.
        assert oracle_bucket("aaa", 256) != oracle_bucket("zzz", 256)
        provider = MockProvider(dim=256)
        value = cosine(provider.embed_one("aaaa"), provider.embed_one("zzzz"))
        assert abs(value) < 1e-6

    def test_short_text_falls_back_to_low_order_grams(self):
        provider = MockProvider(dim=64)
        emb = provider.embed_one("ab")
        expected = np.zeros(64)
        for bucket in (oracle_bucket("a", 64), oracle_bucket("b", 64), oracle_bucket("ab", 64)):
            expected[bucket] += 1
        expected /= np.linalg.norm(expected)
        assert np.allclose(emb.values, expected, atol=0)

    def test_empty_text_rejected(self):
        with pytest.raises(ScoringError):
            MockProvider().embed_one("")

    def test_matrix_path_matches_single_path(self):
        provider = MockProvider(dim=128)
        texts = ["hello world", "नमस्कार जग", "abc", "mixed नम text"]
        matrix = provider.embed_matrix(texts)
        for row, text in zip(matrix, texts):
            assert np.array_equal(row, provider.embed_one(text).values)

    def test_mock_gram_bucket_public_helper(self):
        assert mock_gram_bucket("abc", 256) == oracle_bucket("abc", 256)


class TestScorePair:
    def test_same_text_both_sides_scores_one(self):
        sp = score_pair(make_pair("same text here", "same text here"), MockProvider())
        assert abs(sp.similarity - 1.0) < 1e-6

    def test_negative_cosine_clamped_to_zero(self):
        provider = FixedProvider({"a": [1.0, 0.0], "b": [-1.0, 0.1]}, dim=2)
        sp = score_pair(make_pair("a", "b"), provider)
        assert sp.similarity == 0.0

    def test_scorer_id_recorded(self):
        provider = MockProvider()
        sp = score_pair(make_pair("x y z", "p q r"), provider)
        assert sp.scorer_id == provider.provider_id

    @given(st.text(alphabet=st.characters(min_codepoint=33, max_codepoint=0x10FF), min_size=1, max_size=30))
    def test_self_similarity_property(self, text):
        sp = score_pair(make_pair(text, text, "t"), MockProvider(dim=64))
        assert abs(sp.similarity - 1.0) <= 1e-6


def _scored(scores):
    return [
        ScoredPair(pair=make_pair(f"s{i}", f"t{i}", str(i)), similarity=s, scorer_id="m")
        for i, s in enumerate(scores)
    ]


class TestFilterByThreshold:
    def test_boundary_inclusive(self):
        kept, rejected = filter_by_threshold(_scored([0.65, 0.70, 0.90]), SimilarityThreshold(0.7))
        assert [sp.similarity for sp in kept] == [0.70, 0.90]
        assert [sp.similarity for sp in rejected] == [0.65]

    def test_zero_threshold_keeps_all(self):
        kept, rejected = filter_by_threshold(_scored([0.0, 0.5, 1.0]), 0.0)
        assert len(kept) == 3 and not rejected

    def test_max_threshold_rejects_all_below_one(self):
        kept, rejected = filter_by_threshold(_scored([0.2, 0.99]), 1.0)
        assert not kept and len(rejected) == 2

    @given(st.lists(st.floats(0, 1), max_size=60), st.floats(0, 1), st.floats(0, 1))
    def test_monotone_and_partition(self, scores, tau_a, tau_b):
        lo, hi = sorted((tau_a, tau_b))
        scored = _scored(scores)
        kept_lo, rejected_lo = filter_by_threshold(scored, lo)
        kept_hi, rejected_hi = filter_by_threshold(scored, hi)
        assert {sp.pair.id for sp in kept_hi} <= {sp.pair.id for sp in kept_lo}
        assert len(kept_lo) + len(rejected_lo) == len(scored)
        ids = [sp.pair.id for sp in kept_lo] + [sp.pair.id for sp in rejected_lo]
        assert sorted(ids) == sorted(sp.pair.id for sp in scored)
        # order preserved within each side
        assert [sp.pair.id for sp in kept_lo] == [sp.pair.id for sp in scored if sp.similarity >= lo]


class TestIterScored:
    def test_jobs_do_not_change_output(self):
        pairs = [make_pair(f"alpha beta {i}", f"gamma delta {i}", str(i)) for i in range(257)]
        sequential = list(iter_scored(iter(pairs), MockProvider(), jobs=1))
        parallel = list(iter_scored(iter(pairs), MockProvider(), jobs=4))
        assert [sp.pair.id for sp in sequential] == [str(i) for i in range(257)]
        assert sequential == parallel

    def test_unscored_sidecar_routing(self):
        table = {"good": [1.0, 0.0], "poison": [0.0, 0.0]}
        provider = FixedProvider(table, dim=2)
        provider.embed_matrix = lambda texts: np.stack([np.asarray(table[t], dtype=np.float64) for t in texts])
        pairs = [make_pair("good", "good", "ok"), make_pair("good", "poison", "bad")]
        dropped = []
        out = list(iter_scored(iter(pairs), provider, on_unscored=lambda p, e: dropped.append(p.id)))
        assert [sp.pair.id for sp in out] == ["ok"]
        assert dropped == ["bad"]


class TestScoreCache:
    def test_cache_avoids_reembedding(self, tmp_path):
        cache_path = str(tmp_path / "scores.sqlite")
        pairs = [make_pair(f"src {i} text", f"tgt {i} text", str(i)) for i in range(10)]

        class CountingMock(MockProvider):
            calls = 0

            def embed_matrix(self, texts):
                CountingMock.calls += 1
                return super().embed_matrix(texts)

        provider = CountingMock()
        cache = ScoreCache(cache_path)
        first = list(iter_scored(iter(pairs), provider, cache=cache))
        cache.close()
        calls_after_first = CountingMock.calls
        assert calls_after_first > 0

        cache = ScoreCache(cache_path)
        second = list(iter_scored(iter(pairs), provider, cache=cache))
        cache.close()
        assert CountingMock.calls == calls_after_first  # all hits
        assert first == second

    def test_key_depends_on_provider_and_texts(self):
        a = ScoreCache.key("p1", make_pair("a", "b"))
        assert a == ScoreCache.key("p1", make_pair("a", "b"))
        assert a != ScoreCache.key("p2", make_pair("a", "b"))
        assert a != ScoreCache.key("p1", make_pair("a", "c"))
