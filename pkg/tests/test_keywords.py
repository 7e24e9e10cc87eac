"""Topic model recovery on generated corpora plus hand-evaluated term scores."""

import math

import numpy as np
import pytest

import oracles
from crisiscast.errors import (
    BadHyperparameter,
    BadParameter,
    EmptyCorpus,
    IndexOutOfRange,
    InsufficientSeeds,
    LambdaOutOfRange,
    ParseError,
    UnknownTerm,
)
from crisiscast.keywords import (
    Corpus,
    EmbeddingTable,
    SeedTags,
    TopicModel,
    essentiality,
    fit_lda,
    heldout_perplexity,
    keyword_report,
    load_corpus,
    load_embeddings,
    load_seed_tags,
    relevance,
    saliency,
    tokenize,
    trending_terms,
)


def two_term_model(phi, weights):
    """Hand-built model over terms ('a', 'b', ...) with given rows."""
    phi = np.asarray(phi, dtype=float)
    terms = tuple("abcdefgh"[: phi.shape[1]])
    return TopicModel(
        n_topics=phi.shape[0],
        terms=terms,
        phi=phi,
        topic_weights=np.asarray(weights, dtype=float),
        doc_theta=np.full((1, phi.shape[0]), 1.0 / phi.shape[0]),
    )


class TestCorpus:
    def test_tokenize(self):
        assert tokenize("Hello, WORLD!! a b2 c") == ["hello", "world", "b2"]

    def test_from_texts_counts(self):
        c = Corpus.from_texts(["apple apple pear", "pear plum"])
        assert c.vocabulary == ("apple", "pear", "plum")
        assert c.term_frequency == {"apple": 2, "pear": 2, "plum": 1}
        assert c.n_tokens == 5

    def test_frequency_must_match_documents(self):
        with pytest.raises(BadParameter):
            Corpus(
                documents=(("apple",),),
                vocabulary=("apple",),
                term_frequency={"apple": 3},
            )
        with pytest.raises(BadParameter):
            Corpus(documents=(("pear",),), vocabulary=("apple",), term_frequency={"apple": 0})

    def test_unknown_term(self):
        c = Corpus.from_texts(["apple"])
        with pytest.raises(UnknownTerm):
            c.term_index("durian")

    def test_load_corpus(self, tmp_path):
        path = tmp_path / "docs.txt"
        path.write_text("Apple pie!\nplum, plum.\n", encoding="utf-8")
        c = load_corpus(str(path))
        assert c.documents == (("apple", "pie"), ("plum", "plum"))


class TestFitLda:
    def test_recovers_disjoint_topics(self):
        rng = np.random.default_rng(101)
        docs, topics = oracles.two_topic_corpus(rng)
        corpus = Corpus.from_documents(docs)
        model = fit_lda(corpus, n_topics=2, iterations=15, seed=7)
        truth = np.zeros((2, len(model.terms)))
        for k, dist in enumerate(topics):
            for j, term in enumerate(model.terms):
                truth[k, j] = dist.get(term, 0.0)
        sims = np.zeros((2, 2))
        for k in range(2):
            for j in range(2):
                num = truth[k] @ model.phi[j]
                sims[k, j] = num / (np.linalg.norm(truth[k]) * np.linalg.norm(model.phi[j]))
        best = max(sims[0, 0] + sims[1, 1], sims[0, 1] + sims[1, 0]) / 2.0
        assert best >= 0.9

    def test_homogeneous_corpus_dominant_topic_matches_empirical(self):
        rng = np.random.default_rng(102)
        pool = [f"w{j}" for j in range(10)]
        weights = np.linspace(1.0, 3.0, 10)
        weights /= weights.sum()
        docs = [
            [str(w) for w in rng.choice(pool, size=40, p=weights)] for _ in range(150)
        ]
        counts = {}
        for doc in docs:
            for tok in doc:
                counts[tok] = counts.get(tok, 0) + 1
        total = sum(counts.values())
        corpus = Corpus.from_documents(docs)
        model = fit_lda(corpus, n_topics=2, alpha=0.01, iterations=100, seed=11)
        dominant = int(np.argmax(model.topic_weights))
        empirical = np.array([counts[t] / total for t in model.terms])
        assert np.abs(model.phi[dominant] - empirical).sum() <= 0.05

    def test_distribution_invariants(self):
        rng = np.random.default_rng(103)
        docs, _ = oracles.two_topic_corpus(rng, n_docs=40, doc_len=20)
        model = fit_lda(Corpus.from_documents(docs), n_topics=3, iterations=5, seed=3)
        assert np.allclose(model.phi.sum(axis=1), 1.0, atol=1e-9)
        assert model.topic_weights.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(model.phi >= 0.0)
        assert np.allclose(model.doc_theta.sum(axis=1), 1.0, atol=1e-9)

    def test_same_seed_bit_identical(self):
        rng = np.random.default_rng(104)
        docs, _ = oracles.two_topic_corpus(rng, n_docs=30, doc_len=15)
        corpus = Corpus.from_documents(docs)
        a = fit_lda(corpus, n_topics=2, iterations=5, seed=42)
        b = fit_lda(corpus, n_topics=2, iterations=5, seed=42)
        assert np.array_equal(a.phi, b.phi)
        assert np.array_equal(a.doc_theta, b.doc_theta)

    def test_perplexity_improves_with_sweeps(self):
        rng = np.random.default_rng(105)
        docs, _ = oracles.two_topic_corpus(rng, n_docs=120, doc_len=30)
        train, held = docs[: len(docs) * 9 // 10], docs[len(docs) * 9 // 10 :]
        corpus = Corpus.from_documents(train)
        early = fit_lda(corpus, n_topics=2, iterations=1, seed=5)
        late = fit_lda(corpus, n_topics=2, iterations=15, seed=5)
        assert heldout_perplexity(late, held, seed=1) < heldout_perplexity(early, held, seed=1)

    def test_validation(self):
        corpus = Corpus.from_texts(["apple pear"])
        with pytest.raises(EmptyCorpus):
            fit_lda(Corpus.from_texts([]), n_topics=2)
        with pytest.raises(BadHyperparameter):
            fit_lda(corpus, n_topics=1)
        with pytest.raises(BadHyperparameter):
            fit_lda(corpus, n_topics=2, alpha=0.0)
        with pytest.raises(BadHyperparameter):
            fit_lda(corpus, n_topics=2, beta=-1.0)
        with pytest.raises(BadHyperparameter):
            fit_lda(corpus, n_topics=2, iterations=0)


class TestSaliency:
    def test_hand_value(self):
        # p(t) = (.5, .5) and p(t|a) = (1, 0) with frequency 10
        model = two_term_model([[1.0, 0.0], [0.0, 1.0]], [0.5, 0.5])
        corpus = Corpus.from_documents([["a"] * 10 + ["b"] * 4])
        assert saliency(model, corpus, "a") == pytest.approx(10.0 * math.log(2.0), abs=1e-12)

    def test_identical_topics_score_zero(self):
        model = two_term_model([[0.3, 0.7], [0.3, 0.7]], [0.4, 0.6])
        corpus = Corpus.from_documents([["a", "b", "b"]])
        assert saliency(model, corpus, "a") == pytest.approx(0.0, abs=1e-12)
        assert saliency(model, corpus, "b") == pytest.approx(0.0, abs=1e-12)

    def test_linear_in_frequency(self):
        model = two_term_model([[0.9, 0.1], [0.2, 0.8]], [0.5, 0.5])
        single = Corpus.from_documents([["a", "b"]])
        double = Corpus.from_documents([["a", "a", "b"]])
        assert saliency(model, double, "a") == pytest.approx(
            2.0 * saliency(model, single, "a"), rel=1e-12
        )

    def test_non_negative_on_fitted_model(self):
        rng = np.random.default_rng(106)
        docs, _ = oracles.two_topic_corpus(rng, n_docs=30, doc_len=15)
        corpus = Corpus.from_documents(docs)
        model = fit_lda(corpus, n_topics=3, iterations=5, seed=2)
        for term in corpus.vocabulary:
            assert saliency(model, corpus, term) >= 0.0

    def test_unknown_term(self):
        model = two_term_model([[1.0, 0.0], [0.0, 1.0]], [0.5, 0.5])
        corpus = Corpus.from_documents([["a", "b"]])
        with pytest.raises(UnknownTerm):
            saliency(model, corpus, "zz")


class TestRelevance:
    # p(w|t0) = 0.02 against marginal p(w) = 0.01
    MODEL = two_term_model([[0.02, 0.98, 0.0], [0.0, 0.0, 1.0]], [0.5, 0.5])

    def test_hand_value(self):
        assert relevance(self.MODEL, "a", 0, 0.6) == pytest.approx(0.812, abs=1e-12)

    def test_endpoints_collapse(self):
        assert relevance(self.MODEL, "a", 0, 1.0) == pytest.approx(0.02, abs=1e-15)
        assert relevance(self.MODEL, "a", 0, 0.0) == pytest.approx(2.0, abs=1e-12)

    def test_lambda_bounds(self):
        for bad in (-0.1, 1.0001, 5.0):
            with pytest.raises(LambdaOutOfRange):
                relevance(self.MODEL, "a", 0, bad)

    def test_topic_bounds(self):
        with pytest.raises(IndexOutOfRange):
            relevance(self.MODEL, "a", 2, 0.5)
        with pytest.raises(IndexOutOfRange):
            relevance(self.MODEL, "a", -1, 0.5)

    def test_unknown_term(self):
        with pytest.raises(UnknownTerm):
            relevance(self.MODEL, "zz", 0, 0.5)


def unit(angle):
    return np.array([math.cos(angle), math.sin(angle)])


class TestEssentiality:
    def test_seed_keeps_its_value(self):
        seeds = SeedTags({"bread": 0.93})
        emb = EmbeddingTable({"anything": np.array([1.0, 0.0])})
        # no embedding needed for a tagged term
        assert essentiality(seeds, emb, "bread", m_neighbors=1) == 0.93

    def test_equidistant_seeds_average(self):
        emb = EmbeddingTable(
            {
                "query": np.array([1.0, 0.0]),
                "need": np.array([1.0, 1.0]),
                "want": np.array([1.0, -1.0]),
            }
        )
        seeds = SeedTags({"need": 1.0, "want": 0.0})
        assert essentiality(seeds, emb, "query", m_neighbors=2) == pytest.approx(0.5, abs=1e-12)

    def test_three_seed_weighted_mean(self):
        emb = EmbeddingTable(
            {
                "query": np.array([1.0, 0.0]),
                "s1": np.array([0.9, math.sqrt(1 - 0.81)]),
                "s2": np.array([0.8, math.sqrt(1 - 0.64)]),
                "s3": np.array([0.1, math.sqrt(1 - 0.01)]),
            }
        )
        seeds = SeedTags({"s1": 1.0, "s2": 1.0, "s3": 0.0})
        got = essentiality(seeds, emb, "query", m_neighbors=3)
        assert got == pytest.approx(17.0 / 18.0, abs=1e-9)

    def test_negative_cosines_are_floored(self):
        emb = EmbeddingTable(
            {
                "query": np.array([1.0, 0.0]),
                "close": np.array([1.0, 0.1]),
                "opposite": np.array([-1.0, 0.0]),
            }
        )
        seeds = SeedTags({"close": 0.4, "opposite": 1.0})
        # the opposing seed gets weight max(cos, 0) = 0
        assert essentiality(seeds, emb, "query", m_neighbors=2) == pytest.approx(0.4, abs=1e-12)

    def test_all_nonpositive_fall_back_to_plain_mean(self):
        emb = EmbeddingTable(
            {
                "query": np.array([1.0, 0.0]),
                "x": np.array([-1.0, 0.4]),
                "y": np.array([-1.0, -0.4]),
            }
        )
        seeds = SeedTags({"x": 1.0, "y": 0.0})
        assert essentiality(seeds, emb, "query", m_neighbors=2) == pytest.approx(0.5, abs=1e-12)

    def test_seed_order_does_not_matter(self):
        rng = np.random.default_rng(107)
        vectors = {f"s{i}": rng.normal(size=5) for i in range(20)}
        vectors["query"] = rng.normal(size=5)
        emb = EmbeddingTable(vectors)
        values = {f"s{i}": float(rng.uniform()) for i in range(20)}
        forward = essentiality(SeedTags(values), emb, "query", m_neighbors=6)
        shuffled = dict(reversed(list(values.items())))
        backward = essentiality(SeedTags(shuffled), emb, "query", m_neighbors=6)
        assert forward == backward
        assert 0.0 <= forward <= 1.0

    def test_multi_token_mean_fallback(self):
        emb = EmbeddingTable(
            {
                "apple": np.array([1.0, 0.0]),
                "pie": np.array([0.0, 1.0]),
                "flour": np.array([1.0, 1.0]),
            }
        )
        seeds = SeedTags({"flour": 0.8})
        got = essentiality(seeds, emb, "apple pie", m_neighbors=1)
        assert got == pytest.approx(0.8, abs=1e-12)

    def test_errors(self):
        emb = EmbeddingTable({"apple": np.array([1.0, 0.0])})
        seeds = SeedTags({"untagged": 0.5})
        with pytest.raises(UnknownTerm):
            essentiality(seeds, emb, "zzz", m_neighbors=1)
        with pytest.raises(InsufficientSeeds):
            essentiality(seeds, emb, "apple", m_neighbors=1)
        with pytest.raises(BadParameter):
            essentiality(seeds, emb, "apple", m_neighbors=0)

    def test_embedding_table_validation(self):
        with pytest.raises(BadParameter):
            EmbeddingTable({})
        with pytest.raises(BadParameter):
            EmbeddingTable({"a": np.zeros(3)})
        with pytest.raises(BadParameter):
            EmbeddingTable({"a": np.ones(3), "b": np.ones(4)})

    def test_seed_tag_validation(self):
        with pytest.raises(BadParameter):
            SeedTags({"a": 1.2})
        tags = SeedTags({"  Mixed  ": 0.3})
        assert "mixed" in tags
        assert tags.value("MIXED") == 0.3


class TestTrending:
    @staticmethod
    def padded(term, count, total, filler="filler"):
        # single-document corpus with `count` copies of term in `total` tokens
        return Corpus.from_documents([[term] * count + [filler] * (total - count)])

    def test_hand_ratio(self):
        recent = self.padded("mask", 50, 1000)
        baseline = self.padded("mask", 1, 1000)
        ratios = dict(trending_terms(recent, baseline, min_count=5))
        assert ratios["mask"] == pytest.approx(0.05 / (0.001 + 0.001), rel=1e-12)

    def test_identical_corpora_near_one(self):
        corpus = self.padded("mask", 100, 1000)
        ratios = dict(trending_terms(corpus, corpus, min_count=5))
        for ratio in ratios.values():
            assert 0.9 < ratio <= 1.0

    def test_min_count_floor(self):
        recent = self.padded("rare", 3, 1000)
        baseline = self.padded("other", 10, 1000)
        assert "rare" not in dict(trending_terms(recent, baseline, min_count=5))
        assert "rare" in dict(trending_terms(recent, baseline, min_count=3))

    def test_sorted_descending(self):
        recent = Corpus.from_documents([["hot"] * 40 + ["warm"] * 10 + ["cold"] * 50])
        baseline = Corpus.from_documents([["hot"] * 2 + ["warm"] * 2 + ["cold"] * 96])
        out = trending_terms(recent, baseline, min_count=5)
        assert [t for t, _ in out] == ["hot", "warm", "cold"]
        assert all(a[1] >= b[1] for a, b in zip(out, out[1:]))

    def test_empty_corpus(self):
        filled = self.padded("mask", 5, 10)
        with pytest.raises(EmptyCorpus):
            trending_terms(Corpus.from_texts([]), filled)
        with pytest.raises(EmptyCorpus):
            trending_terms(filled, Corpus.from_texts([]))


class TestLoadersAndReport:
    def test_seed_tags_file(self, tmp_path):
        path = tmp_path / "seeds.csv"
        path.write_text("term,score\nBread,0.9\nlego,0.1\n", encoding="utf-8")
        tags = load_seed_tags(str(path))
        assert tags.value("bread") == 0.9
        assert len(tags) == 2
        bad = tmp_path / "bad.csv"
        bad.write_text("bread,0.9,extra\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_seed_tags(str(bad))
        bad.write_text("bread,high\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_seed_tags(str(bad))

    def test_missing_files_are_parse_errors(self, tmp_path):
        gone = str(tmp_path / "gone")
        with pytest.raises(ParseError, match="cannot read"):
            load_corpus(gone)
        with pytest.raises(ParseError, match="cannot read"):
            load_seed_tags(gone)
        with pytest.raises(ParseError, match="cannot read"):
            load_embeddings(gone)

    def test_embeddings_file(self, tmp_path):
        path = tmp_path / "vectors.txt"
        path.write_text("bread 1.0 0.0\nlego 0.0 1.0\n\n", encoding="utf-8")
        emb = load_embeddings(str(path))
        assert np.array_equal(emb.vector("bread"), [1.0, 0.0])
        bad = tmp_path / "bad.txt"
        bad.write_text("loner\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_embeddings(str(bad))
        bad.write_text("bread 1.0 oops\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_embeddings(str(bad))

    def test_keyword_report_rows(self):
        rng = np.random.default_rng(108)
        docs, _ = oracles.two_topic_corpus(rng, n_docs=40, doc_len=20, vocab_per_topic=6)
        corpus = Corpus.from_documents(docs)
        model = fit_lda(corpus, n_topics=2, iterations=10, seed=9)
        emb = EmbeddingTable(
            {term: rng.normal(size=4) for term in corpus.vocabulary}
        )
        seeds = SeedTags({term: 1.0 for term in corpus.vocabulary[:3]})
        baseline = Corpus.from_documents(docs[:20])
        rows = keyword_report(
            model,
            corpus,
            seeds=seeds,
            embeddings=emb,
            baseline=baseline,
            min_count=1,
            m_neighbors=3,
        )
        assert [r.term for r in rows] == sorted(
            corpus.vocabulary, key=lambda t: (-saliency(model, corpus, t), t)
        )
        for row in rows:
            assert row.frequency == corpus.term_frequency[row.term]
            assert 0 <= row.best_topic < 2
            assert row.essentiality is not None and 0.0 <= row.essentiality <= 1.0
            assert row.trend_ratio is not None

    def test_keyword_report_optional_columns_absent(self):
        corpus = Corpus.from_documents([["a", "b"] * 3])
        model = two_term_model([[0.9, 0.1], [0.2, 0.8]], [0.5, 0.5])
        rows = keyword_report(model, corpus, top_n=1)
        assert len(rows) == 1
        assert rows[0].essentiality is None
        assert rows[0].trend_ratio is None
