"""Keyword analysis: LDA topic modeling by collapsed Gibbs sampling,
saliency/relevance term scoring, embedding-based essentiality propagation
from a seed tag list, and trending-term detection.

Embeddings are ingested from a text file, never trained here. Multi-token
keywords fall back to the mean of their known word vectors.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadHyperparameter,
    BadParameter,
    DivisionByZeroValue,
    EmptyCorpus,
    IndexOutOfRange,
    InsufficientSeeds,
    LambdaOutOfRange,
    ParseError,
    UnknownTerm,
)

DEFAULT_TOPICS = 20
DEFAULT_BETA = 0.01
DEFAULT_ITERATIONS = 1000
DEFAULT_NEIGHBORS = 10
DEFAULT_MIN_COUNT = 5

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop tokens shorter than 2."""
    return [tok for tok in _TOKEN_SPLIT.split(text.lower()) if len(tok) >= 2]


@dataclass(frozen=True)
class Corpus:
    documents: tuple[tuple[str, ...], ...]
    vocabulary: tuple[str, ...]
    term_frequency: dict[str, int]

    def __post_init__(self) -> None:
        index = {term: i for i, term in enumerate(self.vocabulary)}
        if len(index) != len(self.vocabulary):
            raise BadParameter("vocabulary contains duplicate terms")
        recount: dict[str, int] = {}
        for doc in self.documents:
            for tok in doc:
                if tok not in index:
                    raise BadParameter(f"document token {tok!r} missing from vocabulary")
                recount[tok] = recount.get(tok, 0) + 1
        for term in self.vocabulary:
            if self.term_frequency.get(term, 0) != recount.get(term, 0):
                raise BadParameter(f"term_frequency disagrees with documents for {term!r}")
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_documents(cls, documents: list[list[str]]) -> "Corpus":
        vocab: list[str] = []
        seen: set[str] = set()
        freq: dict[str, int] = {}
        for doc in documents:
            for tok in doc:
                if tok not in seen:
                    seen.add(tok)
                    vocab.append(tok)
                freq[tok] = freq.get(tok, 0) + 1
        return cls(
            documents=tuple(tuple(doc) for doc in documents),
            vocabulary=tuple(vocab),
            term_frequency=freq,
        )

    @classmethod
    def from_texts(cls, texts: list[str]) -> "Corpus":
        return cls.from_documents([tokenize(t) for t in texts])

    @property
    def n_tokens(self) -> int:
        return sum(len(doc) for doc in self.documents)

    def term_index(self, term: str) -> int:
        try:
            return self._index[term]
        except KeyError:
            raise UnknownTerm(f"term {term!r} is not in the corpus vocabulary") from None


def load_corpus(path: str) -> Corpus:
    """One document per line, UTF-8."""
    try:
        with open(path, encoding="utf-8") as fh:
            texts = fh.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return Corpus.from_texts(texts)


@dataclass(frozen=True)
class TopicModel:
    """p(w|t) rows, topic weights p(t), and per-document topic mixtures.

    `terms` names the phi columns so scoring functions can resolve words
    without the training corpus.
    """

    n_topics: int
    terms: tuple[str, ...]
    phi: np.ndarray
    topic_weights: np.ndarray
    doc_theta: np.ndarray

    def __post_init__(self) -> None:
        phi = np.asarray(self.phi, dtype=float)
        weights = np.asarray(self.topic_weights, dtype=float)
        theta = np.asarray(self.doc_theta, dtype=float)
        if phi.shape != (self.n_topics, len(self.terms)):
            raise BadParameter("phi must be n_topics x len(terms)")
        if np.any(phi < 0.0) or np.any(weights < 0.0):
            raise BadParameter("probabilities must be non-negative")
        if np.max(np.abs(phi.sum(axis=1) - 1.0)) > 1e-9:
            raise BadParameter("each phi row must sum to 1")
        if weights.shape != (self.n_topics,) or abs(weights.sum() - 1.0) > 1e-9:
            raise BadParameter("topic_weights must be a length-K distribution")
        for arr in (phi, weights, theta):
            arr.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "topic_weights", weights)
        object.__setattr__(self, "doc_theta", theta)
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(self.terms)})

    def term_column(self, term: str) -> int:
        try:
            return self._index[term]
        except KeyError:
            raise UnknownTerm(f"term {term!r} is not in the topic model") from None

    def marginal_term_probability(self, term: str) -> float:
        """p(w) = sum_t p(t) p(w|t)."""
        col = self.term_column(term)
        return float(self.topic_weights @ self.phi[:, col])

    def topic_posterior(self, term: str) -> np.ndarray:
        """p(t|w) by Bayes rule; zero vector if p(w) = 0."""
        col = self.term_column(term)
        joint = self.topic_weights * self.phi[:, col]
        total = joint.sum()
        if total <= 0.0:
            return np.zeros(self.n_topics)
        return joint / total


def fit_lda(
    corpus: Corpus,
    n_topics: int = DEFAULT_TOPICS,
    alpha: float | None = None,
    beta: float = DEFAULT_BETA,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
) -> TopicModel:
    """Collapsed Gibbs sampling; phi, theta, and topic weights come from the
    final sweep's counts with Dirichlet smoothing. Deterministic given seed."""
    if not corpus.documents or corpus.n_tokens == 0:
        raise EmptyCorpus("cannot fit a topic model on an empty corpus")
    if not isinstance(n_topics, (int, np.integer)) or n_topics < 2:
        raise BadHyperparameter("n_topics must be an integer >= 2")
    if alpha is None:
        alpha = 50.0 / n_topics
    if alpha <= 0.0 or beta <= 0.0:
        raise BadHyperparameter("alpha and beta must be positive")
    if not isinstance(iterations, (int, np.integer)) or iterations < 1:
        raise BadHyperparameter("iterations must be a positive integer")

    n_docs = len(corpus.documents)
    n_vocab = len(corpus.vocabulary)
    doc_ids = np.empty(corpus.n_tokens, dtype=np.int64)
    word_ids = np.empty(corpus.n_tokens, dtype=np.int64)
    pos = 0
    for d, doc in enumerate(corpus.documents):
        for tok in doc:
            doc_ids[pos] = d
            word_ids[pos] = corpus.term_index(tok)
            pos += 1
    n_tokens = pos

    rng = np.random.default_rng(seed)
    z = rng.integers(0, n_topics, size=n_tokens)
    n_dk = np.zeros((n_docs, n_topics), dtype=np.float64)
    n_wk = np.zeros((n_vocab, n_topics), dtype=np.float64)
    n_k = np.zeros(n_topics, dtype=np.float64)
    for i in range(n_tokens):
        n_dk[doc_ids[i], z[i]] += 1.0
        n_wk[word_ids[i], z[i]] += 1.0
        n_k[z[i]] += 1.0

    vbeta = n_vocab * beta
    for _ in range(iterations):
        u = rng.random(n_tokens)
        for i in range(n_tokens):
            d = doc_ids[i]
            w = word_ids[i]
            k = z[i]
            n_dk[d, k] -= 1.0
            n_wk[w, k] -= 1.0
            n_k[k] -= 1.0
            weights = (n_dk[d] + alpha) * (n_wk[w] + beta) / (n_k + vbeta)
            cum = np.cumsum(weights)
            k = int(np.searchsorted(cum, u[i] * cum[-1], side="right"))
            if k >= n_topics:
                k = n_topics - 1
            z[i] = k
            n_dk[d, k] += 1.0
            n_wk[w, k] += 1.0
            n_k[k] += 1.0
        assert int(n_k.sum()) == n_tokens

    phi = (n_wk.T + beta) / (n_k[:, None] + vbeta)
    doc_lengths = n_dk.sum(axis=1, keepdims=True)
    theta = (n_dk + alpha) / (doc_lengths + n_topics * alpha)
    return TopicModel(
        n_topics=n_topics,
        terms=corpus.vocabulary,
        phi=phi,
        topic_weights=n_k / n_tokens,
        doc_theta=theta,
    )


def heldout_perplexity(
    model: TopicModel,
    documents: list[list[str]],
    alpha: float | None = None,
    sweeps: int = 20,
    seed: int = 0,
) -> float:
    """Fold-in perplexity: Gibbs-sample document mixtures under frozen phi,
    then score exp(-mean log p(token|doc)). Unknown tokens are skipped."""
    if alpha is None:
        alpha = 50.0 / model.n_topics
    docs = []
    for doc in documents:
        kept = [model.term_column(t) for t in doc if t in model._index]
        if kept:
            docs.append(kept)
    if not docs:
        raise EmptyCorpus("no held-out tokens overlap the model vocabulary")
    rng = np.random.default_rng(seed)
    total_ll = 0.0
    total_n = 0
    for cols in docs:
        n_k = np.zeros(model.n_topics)
        z = rng.integers(0, model.n_topics, size=len(cols))
        for i, k in enumerate(z):
            n_k[k] += 1.0
        for _ in range(sweeps):
            u = rng.random(len(cols))
            for i, w in enumerate(cols):
                n_k[z[i]] -= 1.0
                weights = (n_k + alpha) * model.phi[:, w]
                cum = np.cumsum(weights)
                k = int(np.searchsorted(cum, u[i] * cum[-1], side="right"))
                if k >= model.n_topics:
                    k = model.n_topics - 1
                z[i] = k
                n_k[k] += 1.0
        theta = (n_k + alpha) / (len(cols) + model.n_topics * alpha)
        for w in cols:
            total_ll += math.log(float(theta @ model.phi[:, w]))
        total_n += len(cols)
    return math.exp(-total_ll / total_n)


# --------------------------------------------------------------- scoring


def saliency(model: TopicModel, corpus: Corpus, term: str) -> float:
    """frequency(w) * KL(p(t|w) || p(t)), natural log; zero-probability
    topics contribute nothing."""
    freq = corpus.term_frequency.get(term)
    if freq is None:
        raise UnknownTerm(f"term {term!r} is not in the corpus vocabulary")
    posterior = model.topic_posterior(term)
    prior = model.topic_weights
    total = 0.0
    for ptw, pt in zip(posterior, prior):
        if ptw > 0.0:
            total += ptw * math.log(ptw / pt)
    return freq * total


def relevance(model: TopicModel, term: str, topic: int, lambda_: float) -> float:
    """lambda * p(w|t) + (1 - lambda) * p(w|t)/p(w)."""
    if not 0.0 <= lambda_ <= 1.0:
        raise LambdaOutOfRange("lambda must lie in [0, 1]")
    if not isinstance(topic, (int, np.integer)) or not 0 <= topic < model.n_topics:
        raise IndexOutOfRange(f"topic index {topic} out of range for K={model.n_topics}")
    col = model.term_column(term)
    pwt = float(model.phi[topic, col])
    pw = model.marginal_term_probability(term)
    if pw == 0.0:
        raise DivisionByZeroValue(f"term {term!r} has zero marginal probability")
    return lambda_ * pwt + (1.0 - lambda_) * pwt / pw


@dataclass(frozen=True)
class SeedTags:
    """Human-tagged essentiality ground truth: lowercase term -> score in [0,1]."""

    scores: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        normalized = {}
        for term, value in self.scores.items():
            value = float(value)
            if not 0.0 <= value <= 1.0:
                raise BadParameter(f"seed score for {term!r} must lie in [0,1], got {value}")
            normalized[term.strip().lower()] = value
        object.__setattr__(self, "scores", normalized)

    def __contains__(self, term: str) -> bool:
        return term.strip().lower() in self.scores

    def __len__(self) -> int:
        return len(self.scores)

    def value(self, term: str) -> float:
        return self.scores[term.strip().lower()]


def load_seed_tags(path: str) -> SeedTags:
    """CSV rows of `term,score`; a `term,score` header row is allowed."""
    scores: dict[str, float] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected `term,score`, got {line!r}")
            term, raw = parts[0].strip(), parts[1].strip()
            if lineno == 1 and term.lower() == "term" and raw.lower() == "score":
                continue
            try:
                scores[term] = float(raw)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad score {raw!r}") from exc
    return SeedTags(scores)


@dataclass(frozen=True)
class EmbeddingTable:
    vectors: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        if not self.vectors:
            raise BadParameter("embedding table is empty")
        cleaned = {}
        dim = None
        for term, vec in self.vectors.items():
            arr = np.asarray(vec, dtype=float)
            if dim is None:
                dim = arr.size
            if arr.ndim != 1 or arr.size != dim:
                raise BadParameter(f"vector for {term!r} breaks the uniform dimension {dim}")
            if not np.any(arr):
                raise BadParameter(f"vector for {term!r} is all zeros; cosine undefined")
            arr.setflags(write=False)
            cleaned[term.strip().lower()] = arr
        object.__setattr__(self, "vectors", cleaned)
        object.__setattr__(self, "dimension", dim)

    def __contains__(self, term: str) -> bool:
        return term.strip().lower() in self.vectors

    def vector(self, term: str) -> np.ndarray:
        """Direct lookup, falling back to the mean of known word vectors for
        multi-token keywords."""
        key = term.strip().lower()
        direct = self.vectors.get(key)
        if direct is not None:
            return direct
        parts = [self.vectors[tok] for tok in tokenize(key) if tok in self.vectors]
        if not parts:
            raise UnknownTerm(f"term {term!r} has no embedding")
        mean = np.mean(parts, axis=0)
        if not np.any(mean):
            raise UnknownTerm(f"term {term!r} has a degenerate (zero) mean embedding")
        return mean


def load_embeddings(path: str) -> EmbeddingTable:
    """One term per line followed by its space-separated vector components."""
    vectors: dict[str, np.ndarray] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise ParseError(f"{path}:{lineno}: need a term plus vector components")
            try:
                vectors[parts[0]] = np.array([float(x) for x in parts[1:]], dtype=float)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad vector component") from exc
    return EmbeddingTable(vectors)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def essentiality(
    seeds: SeedTags,
    embeddings: EmbeddingTable,
    term: str,
    m_neighbors: int = DEFAULT_NEIGHBORS,
) -> float:
    """0-1 essentiality: a seed term keeps its tagged value; any other term
    gets the similarity-weighted mean of its m nearest seeds (weights are
    cosines floored at 0, renormalized; equal weights if all cosines are
    non-positive). Result clamped to [0,1]."""
    if not isinstance(m_neighbors, (int, np.integer)) or m_neighbors < 1:
        raise BadParameter("m_neighbors must be a positive integer")
    if term in seeds:
        return seeds.value(term)
    vec = embeddings.vector(term)
    reachable = []
    for seed_term, value in seeds.scores.items():
        try:
            seed_vec = embeddings.vector(seed_term)
        except UnknownTerm:
            continue
        reachable.append((seed_term, value, seed_vec))
    if len(reachable) < m_neighbors:
        raise InsufficientSeeds(
            f"only {len(reachable)} seed terms have embeddings; need {m_neighbors}"
        )
    scored = sorted(
        ((_cosine(vec, sv), st, val) for st, val, sv in reachable),
        key=lambda item: (-item[0], item[1]),
    )
    nearest = scored[:m_neighbors]
    weights = np.array([max(cos, 0.0) for cos, _, _ in nearest])
    values = np.array([val for _, _, val in nearest])
    total = weights.sum()
    if total == 0.0:
        score = float(np.mean(values))
    else:
        score = float(weights @ values / total)
    return min(1.0, max(0.0, score))


def trending_terms(
    recent: Corpus, baseline: Corpus, min_count: int = DEFAULT_MIN_COUNT
) -> list[tuple[str, float]]:
    """Terms whose recent relative frequency jumped versus baseline.

    ratio = (recent_count/recent_total) / (baseline_count/baseline_total + eps)
    with eps = 1/baseline_total, keeping only terms seen at least min_count
    times recently; sorted by descending ratio.
    """
    r_total = recent.n_tokens
    b_total = baseline.n_tokens
    if r_total == 0 or b_total == 0:
        raise EmptyCorpus("both corpora must contain tokens")
    if not isinstance(min_count, (int, np.integer)) or min_count < 1:
        raise BadParameter("min_count must be a positive integer")
    eps = 1.0 / b_total
    out = []
    for term, count in recent.term_frequency.items():
        if count < min_count:
            continue
        r_freq = count / r_total
        b_freq = baseline.term_frequency.get(term, 0) / b_total
        out.append((term, r_freq / (b_freq + eps)))
    out.sort(key=lambda item: (-item[1], item[0]))
    return out


# ---------------------------------------------------------------- report


@dataclass(frozen=True)
class KeywordRow:
    term: str
    frequency: int
    saliency: float
    best_topic: int
    relevance: float
    essentiality: float | None
    trend_ratio: float | None


def keyword_report(
    model: TopicModel,
    corpus: Corpus,
    lambda_: float = 0.6,
    seeds: SeedTags | None = None,
    embeddings: EmbeddingTable | None = None,
    baseline: Corpus | None = None,
    min_count: int = DEFAULT_MIN_COUNT,
    m_neighbors: int = DEFAULT_NEIGHBORS,
    top_n: int | None = None,
) -> list[KeywordRow]:
    """One row per vocabulary term, sorted by descending saliency.

    best_topic maximizes p(t|w); essentiality and trend_ratio are filled
    only when their inputs are supplied (trend uses `corpus` as the recent
    side against `baseline`).
    """
    ratios: dict[str, float] = {}
    if baseline is not None:
        ratios = dict(trending_terms(corpus, baseline, min_count))
    rows = []
    for term in corpus.vocabulary:
        posterior = model.topic_posterior(term)
        best = int(np.argmax(posterior))
        score = None
        if seeds is not None and embeddings is not None:
            try:
                score = essentiality(seeds, embeddings, term, m_neighbors)
            except UnknownTerm:
                score = None
        rows.append(
            KeywordRow(
                term=term,
                frequency=corpus.term_frequency[term],
                saliency=saliency(model, corpus, term),
                best_topic=best,
                relevance=relevance(model, term, best, lambda_),
                essentiality=score,
                trend_ratio=ratios.get(term),
            )
        )
    rows.sort(key=lambda r: (-r.saliency, r.term))
    if top_n is not None:
        rows = rows[:top_n]
    return rows
