"""Bag-of-words corpora: ingestion, serialization and derived corpora.

A :class:`Corpus` is immutable. Document labels are carried for simulation
(feature selection that stands in for a human annotator) and for evaluation;
the training objective never reads them.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError

_TOKEN_RE = re.compile(r"[^\W\d_]+")

CORPUS_MAGIC = "#robust-gefl corpus v1"


def tokenize(text: str) -> list[str]:
    """Lowercase alphabetic runs of length >= 2."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if len(t) >= 2]


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Read a stopword file (one word per line). ``None`` loads the bundled English list."""
    if path is None:
        text = resources.files("robust_gefl").joinpath("data/stopwords_en.txt").read_text("utf-8")
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read stopword file {path}: {exc}") from exc
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip() and not w.startswith("#"))


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {t: i for i, t in enumerate(self.terms)}
        if len(index) != len(self.terms):
            raise InputError("vocabulary terms must be distinct")
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.terms)

    def __getitem__(self, i: int) -> str:
        return self.terms[i]

    def __contains__(self, term: str) -> bool:
        return term in self.index

    def id(self, term: str) -> int:
        try:
            return self.index[term]
        except KeyError:
            raise InputError(f"term {term!r} not in vocabulary") from None


@dataclass(frozen=True)
class SparseDocument:
    """Sorted ``(feature id, count)`` pairs plus an evaluation-only label."""

    entries: tuple[tuple[int, int], ...]
    label: int
    source: str = ""

    def __post_init__(self):
        prev = -1
        for fid, count in self.entries:
            if fid <= prev:
                raise InputError("document feature ids must be strictly increasing")
            if count < 1:
                raise InputError("document counts must be positive")
            prev = fid

    @classmethod
    def from_counts(cls, counts: dict[int, int], label: int, source: str = "") -> "SparseDocument":
        return cls(tuple(sorted((int(k), int(v)) for k, v in counts.items() if v > 0)), label, source)

    @property
    def ids(self) -> list[int]:
        return [fid for fid, _ in self.entries]

    @property
    def length(self) -> int:
        return sum(c for _, c in self.entries)

    def __contains__(self, fid: int) -> bool:
        return any(f == fid for f, _ in self.entries)


@dataclass(frozen=True)
class Corpus:
    documents: tuple[SparseDocument, ...]
    vocabulary: Vocabulary
    classes: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "documents", tuple(self.documents))
        object.__setattr__(self, "classes", tuple(self.classes))
        if len(self.classes) < 2:
            raise InputError(f"need at least 2 classes, got {len(self.classes)}")
        if not self.documents:
            raise InputError("corpus has no documents")
        n_vocab, n_classes = len(self.vocabulary), len(self.classes)
        for doc in self.documents:
            if not 0 <= doc.label < n_classes:
                raise InputError(f"document label {doc.label} out of range")
            if doc.entries and doc.entries[-1][0] >= n_vocab:
                raise InputError("document feature id out of vocabulary range")

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def n_features(self) -> int:
        return len(self.vocabulary)

    @cached_property
    def counts(self) -> sp.csr_matrix:
        """Document-term count matrix, shape ``(n_docs, n_features)``."""
        indptr = [0]
        indices: list[int] = []
        data: list[float] = []
        for doc in self.documents:
            for fid, count in doc.entries:
                indices.append(fid)
                data.append(float(count))
            indptr.append(len(indices))
        return sp.csr_matrix(
            (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
            shape=(len(self.documents), self.n_features),
        )

    @cached_property
    def occurrence(self) -> sp.csr_matrix:
        """Binary occurrence matrix ``I(x_k)``."""
        occ = self.counts.copy()
        occ.data[:] = 1.0
        return occ

    @cached_property
    def document_frequency(self) -> np.ndarray:
        return np.asarray(self.occurrence.sum(axis=0)).ravel().astype(np.int64)

    @cached_property
    def labels(self) -> np.ndarray:
        return np.array([d.label for d in self.documents], dtype=np.int64)

    def label_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def label_distribution(self) -> np.ndarray:
        counts = self.label_counts()
        return counts / counts.sum()

    def subset(self, indices: Iterable[int]) -> "Corpus":
        """Documents at ``indices`` (in the given order), sharing vocabulary and classes."""
        return Corpus(tuple(self.documents[i] for i in indices), self.vocabulary, self.classes)


def _read_tsv(path: Path) -> list[tuple[str, str, str]]:
    rows = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise InputError(f"{path}:{lineno}: expected 'label<TAB>text'")
            label, text = line.split("\t", 1)
            rows.append((label.strip(), text, f"{path.name}:{lineno}"))
    return rows


def _read_directory(path: Path) -> list[tuple[str, str, str]]:
    rows = []
    for class_dir in sorted(p for p in path.iterdir() if p.is_dir()):
        for doc_path in sorted(p for p in class_dir.rglob("*") if p.is_file()):
            text = doc_path.read_text(encoding="utf-8", errors="replace")
            rows.append((class_dir.name, text, str(doc_path.relative_to(path))))
    return rows


def build_corpus(rows: Sequence[tuple[str, str, str]], stopwords: Iterable[str] = (), min_count: int = 2) -> Corpus:
    """Build a corpus from ``(label, raw text, source id)`` rows."""
    stop = frozenset(stopwords)
    return from_tokens(
        [[t for t in tokenize(text) if t not in stop] for _, text, _ in rows],
        [label for label, _, _ in rows],
        [source for _, _, source in rows],
        min_count,
    )


def from_tokens(token_lists: Sequence[Sequence[str]], labels: Sequence[str],
                sources: Sequence[str] | None = None, min_count: int = 1) -> Corpus:
    """Corpus from already-tokenized documents.

    Words in fewer than ``min_count`` documents are dropped; the vocabulary is
    ordered by descending document frequency, then lexicographically; class
    ids follow the lexicographic order of class names.
    """
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise InputError(f"need at least 2 classes, found {len(classes)}")
    class_id = {c: i for i, c in enumerate(classes)}
    token_counts = [Counter(tokens) for tokens in token_lists]
    df: Counter = Counter()
    for counts in token_counts:
        df.update(counts.keys())
    kept = [t for t, n in df.items() if n >= min_count]
    if not kept:
        raise InputError("empty vocabulary after filtering")
    kept.sort(key=lambda t: (-df[t], t))
    vocab = Vocabulary(tuple(kept))
    if sources is None:
        sources = [f"doc{i}" for i in range(len(token_lists))]
    docs = []
    for counts, label, source in zip(token_counts, labels, sources):
        ids = {vocab.index[t]: n for t, n in counts.items() if t in vocab.index}
        docs.append(SparseDocument.from_counts(ids, class_id[label], source))
    return Corpus(tuple(docs), vocab, classes)


def ingest(path: str | Path, stopwords: Iterable[str] = (), min_count: int = 2) -> Corpus:
    """Read a TSV file (``label<TAB>text``) or a ``root/<class>/<file>`` directory."""
    path = Path(path)
    try:
        if path.is_dir():
            rows = _read_directory(path)
        elif path.is_file():
            rows = _read_tsv(path)
        else:
            raise InputError(f"no such corpus path: {path}")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read corpus {path}: {exc}") from exc
    if not rows:
        raise InputError(f"no documents found in {path}")
    return build_corpus(rows, stopwords, min_count)


def unbalance(corpus: Corpus, target_class: int, remove_fraction: float, seed: int) -> Corpus:
    """Remove ``floor(remove_fraction * n_target)`` random documents of ``target_class``."""
    if not 0 <= target_class < corpus.n_classes:
        raise InputError(f"invalid class id {target_class}")
    if not 0.0 <= remove_fraction < 1.0:
        raise InputError("remove_fraction must lie in [0, 1)")
    target = np.flatnonzero(corpus.labels == target_class)
    if target.size == 0:
        raise InputError(f"corpus has no documents of class {target_class}")
    # epsilon guards products such as 0.29 * 100 = 28.999999999999996
    n_remove = math.floor(remove_fraction * target.size + 1e-9)
    if n_remove == 0:
        return corpus
    rng = np.random.default_rng(seed)
    removed = set(rng.choice(target, size=n_remove, replace=False).tolist())
    return corpus.subset(i for i in range(len(corpus)) if i not in removed)


def cv_folds(corpus: Corpus, k: int, seed: int) -> list[tuple[Corpus, Corpus]]:
    """Shuffled k-fold split; each entry is ``(train, test)``."""
    n = len(corpus)
    if k < 2:
        raise InputError("k must be at least 2")
    if k > n:
        raise InputError(f"cannot make {k} folds from {n} documents")
    order = np.random.default_rng(seed).permutation(n)
    folds = []
    for test_idx in np.array_split(order, k):
        test_idx = np.sort(test_idx)
        mask = np.ones(n, dtype=bool)
        mask[test_idx] = False
        folds.append((corpus.subset(np.flatnonzero(mask)), corpus.subset(test_idx)))
    return folds


def write_corpus(corpus: Corpus, path: str | Path, provenance: dict | None = None) -> None:
    lines = [CORPUS_MAGIC]
    for key, value in (provenance or {}).items():
        lines.append(f"#{key}={value}")
    lines.append("classes\t" + "\t".join(corpus.classes))
    lines.append(f"vocabulary\t{len(corpus.vocabulary)}")
    lines.extend(corpus.vocabulary.terms)
    lines.append(f"documents\t{len(corpus)}")
    for doc in corpus.documents:
        body = " ".join(f"{fid}:{count}" for fid, count in doc.entries)
        lines.append(f"{corpus.classes[doc.label]}\t{body}\t{doc.source}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_corpus(path: str | Path) -> Corpus:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").split("\n")
    except OSError as exc:
        raise InputError(f"cannot read corpus file {path}: {exc}") from exc
    if not lines or lines[0] != CORPUS_MAGIC:
        raise InputError(f"{path} is not a serialized corpus")
    pos = 1
    while pos < len(lines) and lines[pos].startswith("#"):
        pos += 1
    try:
        head, *classes = lines[pos].split("\t")
        if head != "classes":
            raise ValueError("missing classes header")
        pos += 1
        head, n_vocab = lines[pos].split("\t")
        if head != "vocabulary":
            raise ValueError("missing vocabulary header")
        pos += 1
        terms = tuple(lines[pos:pos + int(n_vocab)])
        pos += int(n_vocab)
        head, n_docs = lines[pos].split("\t")
        if head != "documents":
            raise ValueError("missing documents header")
        pos += 1
        class_id = {c: i for i, c in enumerate(classes)}
        docs = []
        for line in lines[pos:pos + int(n_docs)]:
            label, body, *rest = line.split("\t")
            if len(rest) > 1:
                raise ValueError(f"too many columns in {line[:40]!r}")
            source = rest[0] if rest else ""
            entries = tuple((int(a), int(b)) for a, b in (tok.split(":") for tok in body.split()))
            docs.append(SparseDocument(entries, class_id[label], source))
        if len(docs) != int(n_docs):
            raise ValueError("truncated document section")
    except (ValueError, KeyError, IndexError) as exc:
        raise InputError(f"{path}: malformed corpus file ({exc})") from exc
    return Corpus(tuple(docs), Vocabulary(terms), tuple(classes))
