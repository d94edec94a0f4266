"""Prior knowledge: labeled features, neutral features and feature pools.

Labeled features carry a reference class distribution ``p_hat(y | x_k)``.
Neutral features are frequent words whose reference distribution is uniform.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus
from .errors import InputError, KnowledgeUnderflow

log = logging.getLogger(__name__)

LABELED = "labeled"
NEUTRAL = "neutral"
ALL_CLASSES = "*"


def reference_heuristic(assoc_classes: Iterable[int], n_classes: int) -> np.ndarray:
    """0.9/n on each of the n associated classes, 0.1/(|C| - n) on every other class.

    When every class is associated the result is uniform.
    """
    assoc = sorted(set(int(c) for c in assoc_classes))
    if not assoc:
        raise InputError("a labeled feature needs at least one associated class")
    if assoc[0] < 0 or assoc[-1] >= n_classes:
        raise InputError(f"associated class out of range for {n_classes} classes")
    n = len(assoc)
    if n == n_classes:
        return np.full(n_classes, 1.0 / n_classes)
    probs = np.full(n_classes, 0.1 / (n_classes - n))
    probs[assoc] = 0.9 / n
    return probs


def _check_distribution(probs: np.ndarray, n_classes: int) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (n_classes,):
        raise InputError(f"distribution must have {n_classes} entries, got {probs.shape}")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise InputError(f"not a probability distribution: {probs.tolist()}")
    return probs


@dataclass(frozen=True)
class LabeledFeatureSet:
    """Feature ids with one reference distribution per row.

    ``role`` is ``"labeled"`` (the set K) or ``"neutral"`` (the set K').
    """

    features: tuple[int, ...]
    distributions: np.ndarray = field(repr=False)
    role: str = LABELED

    def __post_init__(self):
        features = tuple(int(f) for f in self.features)
        dists = np.asarray(self.distributions, dtype=float)
        if dists.ndim != 2 or dists.shape[0] != len(features):
            if features or dists.size:
                raise InputError("one distribution row per feature required")
        if len(set(features)) != len(features):
            raise InputError("labeled feature ids must be distinct")
        if self.role not in (LABELED, NEUTRAL):
            raise InputError(f"unknown role {self.role!r}")
        if features:
            n_classes = dists.shape[1]
            for row in dists:
                _check_distribution(row, n_classes)
            if self.role == NEUTRAL and not np.allclose(dists, 1.0 / n_classes, rtol=0, atol=1e-12):
                raise InputError("neutral features must carry the uniform distribution")
        dists.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "distributions", dists)

    def __len__(self) -> int:
        return len(self.features)

    @property
    def entries(self) -> list[tuple[int, np.ndarray]]:
        return list(zip(self.features, self.distributions))

    @classmethod
    def empty(cls, n_classes: int, role: str = LABELED) -> "LabeledFeatureSet":
        return cls((), np.zeros((0, n_classes)), role)

    def validate_for(self, corpus: Corpus) -> None:
        if self.features and max(self.features) >= corpus.n_features:
            raise InputError("labeled feature id outside the vocabulary")
        if self.features and self.distributions.shape[1] != corpus.n_classes:
            raise InputError("reference distributions do not match the number of classes")


@dataclass
class FeaturePool:
    """Per-class candidate labeled features, best first."""

    ranked: dict[int, list[tuple[int, float]]]
    n_classes: int

    def __post_init__(self):
        for c in range(self.n_classes):
            self.ranked.setdefault(c, [])

    def size(self, c: int) -> int:
        return len(self.ranked[c])

    def features(self, c: int) -> list[int]:
        return [f for f, _ in self.ranked[c]]


def mutual_information(corpus: Corpus) -> np.ndarray:
    """I(F_k; Y) in nats between binary occurrence of each feature and the label."""
    n_docs = len(corpus)
    y = np.zeros((n_docs, corpus.n_classes))
    y[np.arange(n_docs), corpus.labels] = 1.0
    # joint counts: occurs & class, absent & class
    n_occ = np.asarray((corpus.occurrence.T @ y)).reshape(corpus.n_features, corpus.n_classes)
    n_class = y.sum(axis=0)
    n_abs = n_class[None, :] - n_occ
    p_f = n_occ.sum(axis=1) / n_docs
    p_y = n_class / n_docs

    mi = np.zeros(corpus.n_features)
    for joint, marg in ((n_occ / n_docs, p_f), (n_abs / n_docs, 1.0 - p_f)):
        denom = marg[:, None] * p_y[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(joint > 0, joint * np.log(joint / denom), 0.0)
        mi += term.sum(axis=1)
    return np.maximum(mi, 0.0)


def info_gain_pool(corpus: Corpus, per_class: int) -> FeaturePool:
    """Top ``per_class`` features by mutual information, grouped by the class they indicate.

    Uses document labels, which only simulates a human supplying the features.
    """
    if per_class < 1:
        raise InputError("per_class must be >= 1")
    mi = mutual_information(corpus)
    y = np.zeros((len(corpus), corpus.n_classes))
    y[np.arange(len(corpus)), corpus.labels] = 1.0
    n_occ = np.asarray(corpus.occurrence.T @ y)
    # argmax of p(c | occurs); ties go to the lower class id
    owner = np.argmax(n_occ, axis=1)
    ranked: dict[int, list[tuple[int, float]]] = {}
    for c in range(corpus.n_classes):
        cand = np.flatnonzero((owner == c) & (corpus.document_frequency > 0))
        order = cand[np.lexsort((cand, -mi[cand]))]
        ranked[c] = [(int(f), float(mi[f])) for f in order[:per_class]]
        if len(ranked[c]) < per_class:
            log.warning("class %s has only %d candidate features (wanted %d)",
                        corpus.classes[c], len(ranked[c]), per_class)
    return FeaturePool(ranked, corpus.n_classes)


def neutral_features(corpus: Corpus, count: int) -> LabeledFeatureSet:
    """The ``count`` most document-frequent words, each with a uniform distribution."""
    if count < 0 or count > corpus.n_features:
        raise InputError(f"neutral count must lie in [0, {corpus.n_features}]")
    if count == 0:
        return LabeledFeatureSet.empty(corpus.n_classes, NEUTRAL)
    df = corpus.document_frequency
    ids = np.arange(corpus.n_features)
    order = ids[np.lexsort((ids, -df))][:count]
    uniform = np.full((count, corpus.n_classes), 1.0 / corpus.n_classes)
    return LabeledFeatureSet(tuple(int(i) for i in order), uniform, NEUTRAL)


def draw_labeled(pool: FeaturePool, per_class_counts: Sequence[int], seed: int) -> LabeledFeatureSet:
    """Draw ``per_class_counts[c]`` features uniformly without replacement from each class's pool.

    Draws are prefixes of one seeded permutation per class, so a larger count
    extends a smaller one. A feature drawn for several classes is associated
    with all of them in the reference heuristic.
    """
    if len(per_class_counts) != pool.n_classes:
        raise InputError(f"need one count per class ({pool.n_classes}), got {len(per_class_counts)}")
    rng = np.random.default_rng(seed)
    assoc: dict[int, set[int]] = {}
    for c, want in enumerate(per_class_counts):
        have = pool.size(c)
        perm = rng.permutation(have)
        if want > have:
            raise KnowledgeUnderflow(f"class {c}: requested {want} labeled features, pool has {have}")
        if want < 0:
            raise InputError("feature counts must be non-negative")
        feats = pool.features(c)
        for j in perm[:want]:
            assoc.setdefault(feats[j], set()).add(c)
    features = tuple(sorted(assoc))
    if not features:
        return LabeledFeatureSet.empty(pool.n_classes)
    dists = np.stack([reference_heuristic(assoc[f], pool.n_classes) for f in features])
    return LabeledFeatureSet(features, dists, LABELED)


def write_labeled_features(fs: LabeledFeatureSet, corpus: Corpus, path: str | Path,
                           provenance: dict | None = None) -> None:
    """One line per feature: ``token<TAB>class-names<TAB>distribution``.

    The class column lists the associated classes (comma separated); ``*``
    marks a neutral feature.
    """
    lines = [f"#{k}={v}" for k, v in (provenance or {}).items()]
    lines.append(f"#role={fs.role}")
    for fid, dist in fs.entries:
        if fs.role == NEUTRAL:
            cls = ALL_CLASSES
        else:
            top = dist.max()
            cls = ",".join(corpus.classes[c] for c in np.flatnonzero(np.isclose(dist, top, rtol=0, atol=1e-12)))
        lines.append(f"{corpus.vocabulary[fid]}\t{cls}\t{','.join(repr(float(p)) for p in dist)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_labeled_features(path: str | Path, corpus: Corpus, missing: str = "warn") -> LabeledFeatureSet:
    """Parse a labeled-feature file against ``corpus``'s vocabulary and classes.

    Tokens outside the vocabulary are skipped with a warning, or raise when
    ``missing="error"``. Without a distribution column the heuristic fills it.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read labeled-feature file {path}: {exc}") from exc
    role = LABELED
    class_id = {c: i for i, c in enumerate(corpus.classes)}
    ids: list[int] = []
    dists: list[np.ndarray] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.startswith("#role="):
            role = line.split("=", 1)[1].strip()
            continue
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) < 2:
            raise InputError(f"{path}:{lineno}: expected 'token<TAB>class[<TAB>distribution]'")
        token, cls = cols[0].strip(), cols[1].strip()
        if token not in corpus.vocabulary:
            msg = f"{path}:{lineno}: feature {token!r} not in vocabulary"
            if missing == "error":
                raise InputError(msg)
            log.warning("%s; skipped", msg)
            continue
        if len(cols) >= 3 and cols[2].strip():
            try:
                dist = np.array([float(v) for v in cols[2].split(",")])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: bad distribution ({exc})") from exc
            dist = _check_distribution(dist, corpus.n_classes)
        elif cls == ALL_CLASSES:
            dist = np.full(corpus.n_classes, 1.0 / corpus.n_classes)
        else:
            try:
                assoc = [class_id[c.strip()] for c in cls.split(",")]
            except KeyError as exc:
                raise InputError(f"{path}:{lineno}: unknown class {exc}") from None
            dist = reference_heuristic(assoc, corpus.n_classes)
        ids.append(corpus.vocabulary.id(token))
        dists.append(dist)
    if not ids:
        return LabeledFeatureSet.empty(corpus.n_classes, role)
    return LabeledFeatureSet(tuple(ids), np.stack(dists), role)


def write_pool(pool: FeaturePool, corpus: Corpus, path: str | Path, provenance: dict | None = None) -> None:
    lines = [f"#{k}={v}" for k, v in (provenance or {}).items()]
    lines.append("class\trank\tfeature\tscore")
    for c in range(pool.n_classes):
        for rank, (fid, score) in enumerate(pool.ranked[c], 1):
            lines.append(f"{corpus.classes[c]}\t{rank}\t{corpus.vocabulary[fid]}\t{score!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
