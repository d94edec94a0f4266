"""Collapsed Gibbs sampling for LDA, used to pick labeled features without instance labels."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .corpus import Corpus
from .errors import InputError
from .knowledge import FeaturePool

log = logging.getLogger(__name__)


@numba.njit(cache=True)
def _gibbs_sweep(words, docs, z, nwt, ndt, nt, alpha, eta, v_eta, uniforms):
    n_topics = nt.shape[0]
    weights = np.empty(n_topics)
    for i in range(words.shape[0]):
        w = words[i]
        d = docs[i]
        t = z[i]
        nwt[t, w] -= 1
        ndt[d, t] -= 1
        nt[t] -= 1
        total = 0.0
        for k in range(n_topics):
            total += (ndt[d, k] + alpha) * (nwt[k, w] + eta) / (nt[k] + v_eta)
            weights[k] = total
        u = uniforms[i] * total
        t = 0
        while t < n_topics - 1 and weights[t] <= u:
            t += 1
        z[i] = t
        nwt[t, w] += 1
        ndt[d, t] += 1
        nt[t] += 1


@dataclass
class LdaModel:
    n_topics: int
    alpha: float
    eta: float
    topic_word_counts: np.ndarray
    doc_topic_counts: np.ndarray
    assignments: np.ndarray
    token_words: np.ndarray = field(repr=False)
    token_docs: np.ndarray = field(repr=False)

    @property
    def topic_totals(self) -> np.ndarray:
        return self.topic_word_counts.sum(axis=1)

    def phi(self) -> np.ndarray:
        """Topic-word distributions ``(count + eta) / (topic total + |V| eta)``."""
        n_vocab = self.topic_word_counts.shape[1]
        return (self.topic_word_counts + self.eta) / (self.topic_totals[:, None] + n_vocab * self.eta)

    def top_words(self, per_topic: int) -> list[list[int]]:
        phi = self.phi()
        ids = np.arange(phi.shape[1])
        return [ids[np.lexsort((ids, -row))][:per_topic].tolist() for row in phi]


def _tokens(corpus: Corpus) -> tuple[np.ndarray, np.ndarray]:
    words, docs = [], []
    for d, doc in enumerate(corpus.documents):
        for fid, count in doc.entries:
            words.extend([fid] * count)
            docs.extend([d] * count)
    return np.asarray(words, dtype=np.int64), np.asarray(docs, dtype=np.int64)


def fit(corpus: Corpus, n_topics: int, iterations: int = 500, alpha: float | None = None,
        eta: float = 0.01, seed: int = 0) -> LdaModel:
    """Run ``iterations`` collapsed Gibbs sweeps. ``alpha`` defaults to 50 / T."""
    if n_topics < 1:
        raise InputError("n_topics must be >= 1")
    if iterations < 1:
        raise InputError("iterations must be >= 1")
    if alpha is None:
        alpha = 50.0 / n_topics
    if alpha <= 0 or eta <= 0:
        raise InputError("alpha and eta must be positive")
    words, docs = _tokens(corpus)
    if words.size == 0:
        raise InputError("corpus has no tokens")
    rng = np.random.default_rng(seed)
    n_vocab = corpus.n_features
    z = rng.integers(0, n_topics, size=words.size).astype(np.int64)
    nwt = np.zeros((n_topics, n_vocab), dtype=np.int64)
    ndt = np.zeros((len(corpus), n_topics), dtype=np.int64)
    np.add.at(nwt, (z, words), 1)
    np.add.at(ndt, (docs, z), 1)
    nt = nwt.sum(axis=1)
    for _ in range(iterations):
        _gibbs_sweep(words, docs, z, nwt, ndt, nt, float(alpha), float(eta), float(n_vocab * eta),
                     rng.random(words.size))
    return LdaModel(n_topics, float(alpha), float(eta), nwt, ndt, z, words, docs)


def topic_class_map(model: LdaModel, corpus: Corpus) -> np.ndarray:
    """Map each topic to the class whose documents hold most of its token assignments.

    This uses document labels to simulate a person naming each topic.
    """
    mass = np.zeros((model.n_topics, corpus.n_classes), dtype=np.int64)
    np.add.at(mass, (model.assignments, corpus.labels[model.token_docs]), 1)
    return np.argmax(mass, axis=1)


def lda_feature_pool(model: LdaModel, corpus: Corpus, per_topic: int) -> FeaturePool:
    """Top ``per_topic`` words of each topic by phi, pooled under the topic's mapped class."""
    if per_topic < 1:
        raise InputError("per_topic must be >= 1")
    phi = model.phi()
    mapping = topic_class_map(model, corpus)
    merged: dict[int, dict[int, float]] = {c: {} for c in range(corpus.n_classes)}
    for t, words in enumerate(model.top_words(per_topic)):
        bucket = merged[int(mapping[t])]
        for w in words:
            bucket[w] = max(bucket.get(w, 0.0), float(phi[t, w]))
    ranked = {c: sorted(b.items(), key=lambda kv: (-kv[1], kv[0])) for c, b in merged.items()}
    for c, items in ranked.items():
        if not items:
            log.warning("no LDA topic maps to class %s (simulated topic labeling)", corpus.classes[c])
    return FeaturePool(ranked, corpus.n_classes)


def write_topics(model: LdaModel, corpus: Corpus, path: str | Path, per_topic: int = 20,
                 provenance: dict | None = None) -> None:
    phi = model.phi()
    lines = [f"#{k}={v}" for k, v in (provenance or {}).items()]
    lines.append("topic\trank\tword\tphi")
    for t, words in enumerate(model.top_words(per_topic)):
        for rank, w in enumerate(words, 1):
            lines.append(f"{t}\t{rank}\t{corpus.vocabulary[w]}\t{phi[t, w]!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
