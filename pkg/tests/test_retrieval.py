import math
import random
import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ttsfc.errors import DataError, DimensionMismatch, EmptyCorpus, ProviderError
from ttsfc.retrieval import (
    EvidenceDoc,
    FixtureEmbeddings,
    RankedEvidence,
    bm25_search,
    build_index,
    cosine,
    load_index,
    rerank,
    save_index,
    tokenize,
)

# -- independent oracles --------------------------------------------------------
#
# The brute-force scorer below re-derives term statistics from raw text
# with its own tokenizer and evaluates the scoring formula per document,
# without touching the inverted index.


def oracle_tokenize(text):
    return [t for t in re.split(r"[^0-9a-zÀ-￿]+", text.lower()) if t]


def oracle_scores(docs, query, k1=1.2, b=0.75):
    token_lists = [oracle_tokenize(d.text) for d in docs]
    lengths = [len(t) for t in token_lists]
    avg = sum(lengths) / len(lengths)
    n = len(docs)
    scores = {}
    for q in oracle_tokenize(query):
        df = sum(1 for toks in token_lists if q in toks)
        if df == 0:
            continue
        idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
        for doc, toks, length in zip(docs, token_lists, lengths):
            tf = toks.count(q)
            if tf == 0:
                continue
            norm = k1 * (1 - b + b * length / avg)
            scores[doc.doc_id] = scores.get(doc.doc_id, 0.0) + idf * tf / (tf + norm)
    return scores


def oracle_ranking(docs, query, top_k, k1=1.2, b=0.75):
    scores = oracle_scores(docs, query, k1, b)
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:top_k]


def toy_corpus():
    texts = [
        "cats sit on warm mats",
        "dogs chase cats in the park",
        "the park has warm benches and dogs",
        "remittances reached a record high in 2021",
        "warm cats and warm dogs share mats",
    ]
    return [EvidenceDoc(doc_id=f"d{i}", text=t) for i, t in enumerate(texts)]


def random_corpus(rng, n_docs=50, vocab=("alpha", "beta", "gamma", "delta",
                                          "epsilon", "zeta", "eta", "theta")):
    docs = []
    for i in range(n_docs):
        words = rng.choices(vocab, k=rng.randint(3, 15))
        docs.append(EvidenceDoc(doc_id=f"d{i:03d}", text=" ".join(words)))
    return docs


class TestTokenize:
    def test_lowercase_split(self):
        assert tokenize("Cats, sit!") == ["cats", "sit"]

    def test_underscore_splits(self):
        assert tokenize("a_b") == ["a", "b"]

    def test_unicode(self):
        assert tokenize("Café au lait") == ["café", "au", "lait"]

    def test_numbers_kept(self):
        assert tokenize("KSh400 billion in 2021") == ["ksh400", "billion", "in", "2021"]


class TestBuildIndex:
    def test_single_doc_counts(self):
        index = build_index([EvidenceDoc(doc_id="a", text="cats sit")])
        assert index.doc_count == 1
        assert index.avg_doc_len == 2

    def test_term_in_both_docs(self):
        index = build_index([
            EvidenceDoc(doc_id="a", text="a b"),
            EvidenceDoc(doc_id="b", text="a"),
        ])
        assert len(index.postings["a"]) == 2

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            build_index([])

    def test_duplicate_doc_id(self):
        docs = [EvidenceDoc(doc_id="a", text="x"), EvidenceDoc(doc_id="a", text="y")]
        with pytest.raises(DataError):
            build_index(docs)

    def test_postings_match_brute_force_counts(self):
        docs = toy_corpus()
        index = build_index(docs)
        for ordinal, doc in enumerate(docs):
            tokens = oracle_tokenize(doc.text)
            for term in set(tokens):
                assert (ordinal, tokens.count(term)) in index.postings[term]
        total_postings = sum(len(p) for p in index.postings.values())
        expected = sum(len(set(oracle_tokenize(d.text))) for d in docs)
        assert total_postings == expected


class TestSearch:
    def test_no_matching_terms(self):
        index = build_index(toy_corpus())
        assert bm25_search(index, "xylophone", 10) == []

    def test_single_candidate_ranked_first(self):
        index = build_index(toy_corpus())
        hits = bm25_search(index, "remittances", 5)
        assert hits[0][0] == "d3"
        assert hits[0][1] > 0

    def test_matches_exhaustive_oracle_on_toy_corpus(self):
        docs = toy_corpus()
        index = build_index(docs)
        for query in ("warm cats", "dogs park", "record 2021", "cats cats mats"):
            got = bm25_search(index, query, 10)
            expected = oracle_ranking(docs, query, 10)
            assert len(got) == len(expected)
            for (gid, gscore), (eid, escore) in zip(got, expected):
                assert gid == eid
                assert gscore == pytest.approx(escore, abs=1e-12)

    def test_matches_oracle_on_random_corpora(self):
        rng = random.Random(7)
        for trial in range(20):
            docs = random_corpus(rng)
            index = build_index(docs)
            query = " ".join(rng.choices(
                ["alpha", "beta", "gamma", "delta", "missing"], k=rng.randint(1, 4)))
            got = bm25_search(index, query, len(docs))
            expected = oracle_ranking(docs, query, len(docs))
            assert [g[0] for g in got] == [e[0] for e in expected]

    def test_topk_at_least_one(self):
        index = build_index(toy_corpus())
        with pytest.raises(DataError):
            bm25_search(index, "cats", 0)

    def test_repeat_calls_bit_identical(self):
        index = build_index(toy_corpus())
        a = bm25_search(index, "warm dogs", 5)
        b = bm25_search(index, "warm dogs", 5)
        assert a == b

    @given(
        tf=st.integers(min_value=1, max_value=40),
        length=st.integers(min_value=41, max_value=200),
        df=st.integers(min_value=1, max_value=9),
    )
    def test_score_monotonic_in_tf_and_doc_length(self, tf, length, df):
        # One scored doc inside a 10-doc corpus; score must rise with tf
        # (fixed length) and fall with length (fixed tf).
        k1, b, n = 1.2, 0.75, 10
        avg = 50.0
        idf = math.log(1 + (n - df + 0.5) / (df + 0.5))

        def score(tf_, len_):
            return idf * tf_ / (tf_ + k1 * (1 - b + b * len_ / avg))

        assert score(tf + 1, length) > score(tf, length)
        assert score(tf, length + 1) < score(tf, length)
        assert idf > 0

    def test_idf_positive_for_all_df(self):
        index = build_index(toy_corpus())
        n = index.doc_count
        for df in range(1, n + 1):
            assert math.log(1 + (n - df + 0.5) / (df + 0.5)) > 0


class TestIndexPersistence:
    def test_roundtrip(self, tmp_path):
        index = build_index(toy_corpus(), k1=1.4, b=0.6)
        path = tmp_path / "toy.bmix"
        save_index(index, path)
        loaded = load_index(path)
        assert loaded == index

    def test_search_identical_after_roundtrip(self, tmp_path):
        index = build_index(toy_corpus())
        path = tmp_path / "toy.bmix"
        save_index(index, path)
        loaded = load_index(path)
        assert bm25_search(loaded, "warm cats", 5) == bm25_search(index, "warm cats", 5)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bmix"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(DataError):
            load_index(path)


class TestRerank:
    def test_cosine_extremes(self):
        provider = FixtureEmbeddings({
            "the claim": [1.0, 0.0],
            "same direction": [2.0, 0.0],
            "orthogonal": [0.0, 3.0],
        })
        docs = [
            EvidenceDoc(doc_id="a", text="same direction"),
            EvidenceDoc(doc_id="b", text="orthogonal"),
        ]
        ranked = rerank("c1", "the claim", docs, provider, top_k=2)
        assert ranked.hits[0] == ("a", pytest.approx(1.0))
        assert ranked.hits[1] == ("b", pytest.approx(0.0))

    def test_topk_three_of_many(self):
        rng = random.Random(3)
        vectors = {"claim text": [rng.uniform(-1, 1) for _ in range(4)]}
        docs = []
        for i in range(100):
            text = f"candidate {i}"
            vectors[text] = [rng.uniform(-1, 1) for _ in range(4)]
            docs.append(EvidenceDoc(doc_id=f"d{i:03d}", text=text))
        ranked = rerank("c1", "claim text", docs, FixtureEmbeddings(vectors), top_k=3)
        assert len(ranked.hits) == 3

    def test_order_matches_brute_force_cosine(self):
        rng = random.Random(11)
        vectors = {"q": [rng.uniform(-1, 1) for _ in range(4)]}
        docs = []
        for i in range(6):
            text = f"doc {i}"
            vectors[text] = [rng.uniform(-1, 1) for _ in range(4)]
            docs.append(EvidenceDoc(doc_id=f"d{i}", text=text))
        ranked = rerank("c1", "q", docs, FixtureEmbeddings(vectors), top_k=6)

        def brute_cosine(u, v):
            dot = sum(a * b for a, b in zip(u, v))
            nu = math.sqrt(sum(a * a for a in u))
            nv = math.sqrt(sum(b * b for b in v))
            return dot / (nu * nv)

        expected = sorted(
            ((d.doc_id, brute_cosine(vectors["q"], vectors[d.text])) for d in docs),
            key=lambda kv: (-kv[1], kv[0]),
        )
        assert [h[0] for h in ranked.hits] == [e[0] for e in expected]
        for (_, got), (_, want) in zip(ranked.hits, expected):
            assert got == pytest.approx(want, abs=1e-12)

    def test_no_invented_doc_ids(self):
        provider = FixtureEmbeddings({
            "q": [1.0, 0.0], "a": [0.5, 0.5], "b": [0.1, 0.9],
        })
        docs = [EvidenceDoc(doc_id="a", text="a"), EvidenceDoc(doc_id="b", text="b")]
        ranked = rerank("c1", "q", docs, provider, top_k=5)
        assert set(ranked.doc_ids) <= {"a", "b"}

    def test_empty_candidates(self):
        with pytest.raises(DataError):
            rerank("c1", "q", [], FixtureEmbeddings({}), top_k=3)

    def test_missing_fixture_vector(self):
        with pytest.raises(ProviderError):
            rerank("c1", "q", [EvidenceDoc(doc_id="a", text="a")],
                   FixtureEmbeddings({"q": [1.0]}), top_k=1)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cosine([1.0, 0.0], [1.0, 0.0, 0.0])


class TestRankedEvidence:
    def test_rejects_unsorted_hits(self):
        with pytest.raises(DataError):
            RankedEvidence(claim_id="c", hits=(("a", 0.1), ("b", 0.9)))

    def test_tie_order_by_doc_id(self):
        RankedEvidence(claim_id="c", hits=(("a", 0.5), ("b", 0.5)))
        with pytest.raises(DataError):
            RankedEvidence(claim_id="c", hits=(("b", 0.5), ("a", 0.5)))
