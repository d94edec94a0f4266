import numpy as np
import pytest
from hypothesis import settings

from robust_gefl.corpus import Corpus, SparseDocument, Vocabulary
from robust_gefl.knowledge import LabeledFeatureSet, NEUTRAL, reference_heuristic

settings.register_profile("ci", max_examples=50, deadline=None)
settings.register_profile("dev", max_examples=10, deadline=None)
settings.load_profile("ci")


def tiny_corpus(rng, n_docs, n_features, n_classes):
    """Random corpus in which every feature occurs at least once."""
    terms = tuple(f"w{chr(97 + i // 26)}{chr(97 + i % 26)}" for i in range(n_features))
    rows = []
    for d in range(n_docs):
        k = int(rng.integers(1, n_features + 1))
        ids = rng.choice(n_features, size=k, replace=False)
        rows.append({int(i): int(rng.integers(1, 4)) for i in ids})
    # force coverage so every feature has C_k > 0
    for f in range(n_features):
        if not any(f in r for r in rows):
            rows[int(rng.integers(n_docs))][f] = 1
    docs = [SparseDocument.from_counts(r, d % n_classes) for d, r in enumerate(rows)]
    classes = tuple(f"c{i}" for i in range(n_classes))
    return Corpus(tuple(docs), Vocabulary(terms), classes)


def random_instance(rng, max_docs=5, max_features=10):
    """(corpus, labeled set, neutral set, reference, theta) for gradient checks."""
    n_classes = int(rng.integers(2, 5))
    n_docs = int(rng.integers(2, max_docs + 1))
    n_features = int(rng.integers(3, max_features + 1))
    corpus = tiny_corpus(rng, n_docs, n_features, n_classes)
    perm = rng.permutation(n_features)
    n_lab = int(rng.integers(1, min(4, n_features - 1) + 1))
    lab_ids = sorted(int(i) for i in perm[:n_lab])
    dists = np.stack([reference_heuristic([int(rng.integers(n_classes))], n_classes) for _ in lab_ids])
    labeled = LabeledFeatureSet(tuple(lab_ids), dists)
    neu_ids = sorted(int(i) for i in perm[n_lab:n_lab + 2])
    neutral = LabeledFeatureSet(tuple(neu_ids), np.full((len(neu_ids), n_classes), 1.0 / n_classes), NEUTRAL)
    ref = rng.dirichlet(np.ones(n_classes))
    theta = rng.uniform(-1, 1, size=(n_classes, n_features))
    return corpus, labeled, neutral, ref, theta


def central_difference(f, x, h=1e-5):
    x = np.asarray(x, dtype=float).ravel()
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (f(x + e) - f(x - e)) / (2 * h)
    return grad


def max_relative_error(analytic, numeric):
    scale = max(np.max(np.abs(numeric)), np.max(np.abs(analytic)), 1e-8)
    return float(np.max(np.abs(analytic - numeric)) / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_docs_corpus():
    """Two documents sharing feature 0; used for the averaging examples."""
    vocab = Vocabulary(("aa", "bb", "cc"))
    docs = (SparseDocument(((0, 1), (1, 1)), 0), SparseDocument(((0, 1), (2, 1)), 1))
    return Corpus(docs, vocab, ("neg", "pos"))


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance_report():
    """Record one verdict line per acceptance criterion; shown in the terminal summary."""
    def record(number: int, passed: bool | None, detail: str) -> None:
        verdict = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        line = f"criterion {number}: {verdict}  {detail}"
        ACCEPTANCE[number] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
