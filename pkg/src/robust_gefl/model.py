"""Conditional softmax classifier ``p(y|x) ∝ exp(sum_i theta[y, i] * x_i)`` (no bias)."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus, SparseDocument
from .errors import InputError, NumericalError

MODEL_MAGIC = "#robust-gefl model v1"


@dataclass(frozen=True)
class ModelParameters:
    theta: np.ndarray
    sigma: float = 1.0

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 2:
            raise InputError("theta must be a (classes x features) matrix")
        if not self.sigma > 0:
            raise InputError("sigma must be positive")
        object.__setattr__(self, "theta", theta)

    @classmethod
    def zeros(cls, n_classes: int, n_features: int, sigma: float = 1.0) -> "ModelParameters":
        return cls(np.zeros((n_classes, n_features)), sigma)

    @property
    def n_classes(self) -> int:
        return self.theta.shape[0]

    @property
    def n_features(self) -> int:
        return self.theta.shape[1]

    def check_finite(self) -> None:
        if not np.all(np.isfinite(self.theta)):
            raise NumericalError("non-finite model parameter")


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1, keepdims=True)


def predict_matrix(theta: np.ndarray, counts: sp.spmatrix) -> np.ndarray:
    """Per-document class distributions, shape ``(n_docs, n_classes)``."""
    scores = np.asarray(counts @ theta.T)
    return softmax_rows(scores)


def predict(params: ModelParameters, doc: SparseDocument) -> np.ndarray:
    params.check_finite()
    scores = np.zeros(params.n_classes)
    for fid, count in doc.entries:
        if fid >= params.n_features:
            raise InputError(f"feature id {fid} outside model of {params.n_features} features")
        scores += params.theta[:, fid] * count
    return softmax_rows(scores[None, :])[0]


def feature_conditional(params: ModelParameters, corpus: Corpus, k: int) -> tuple[np.ndarray, int]:
    """Average prediction over documents containing feature ``k``, and their count ``C_k``.

    Returns ``(None, 0)`` when ``k`` occurs nowhere; the caller decides
    whether that is fatal.
    """
    params.check_finite()
    rows = corpus.occurrence[:, k].nonzero()[0]
    if rows.size == 0:
        return None, 0
    probs = predict_matrix(params.theta, corpus.counts[rows])
    return probs.mean(axis=0), int(rows.size)


def class_marginal(params: ModelParameters, corpus: Corpus) -> np.ndarray:
    """Predicted class distribution ``p(y) = mean_x p(y|x)``."""
    params.check_finite()
    return predict_matrix(params.theta, corpus.counts).mean(axis=0)


def classify(params: ModelParameters, doc: SparseDocument) -> int:
    # np.argmax returns the first maximum, i.e. the lowest class id on ties
    return int(np.argmax(predict(params, doc)))


def classify_corpus(params: ModelParameters, corpus: Corpus) -> np.ndarray:
    params.check_finite()
    return np.argmax(predict_matrix(params.theta, corpus.counts), axis=1)


def write_model(params: ModelParameters, classes: tuple[str, ...], path: str | Path,
                provenance: dict | None = None) -> None:
    """Text model file; ``repr`` gives the shortest round-tripping decimal for each float."""
    if len(classes) != params.n_classes:
        raise InputError("class names do not match theta")
    lines = [MODEL_MAGIC]
    lines.extend(f"#{k}={v}" for k, v in (provenance or {}).items())
    lines.append(f"sigma\t{float(params.sigma)!r}")
    lines.append(f"shape\t{params.n_classes}\t{params.n_features}")
    lines.append("classes\t" + "\t".join(classes))
    for row in params.theta:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_model(path: str | Path) -> tuple[ModelParameters, tuple[str, ...]]:
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text(encoding="utf-8").split("\n") if ln]
    except OSError as exc:
        raise InputError(f"cannot read model file {path}: {exc}") from exc
    if not lines or lines[0] != MODEL_MAGIC:
        raise InputError(f"{path} is not a model file")
    body = [ln for ln in lines[1:] if not ln.startswith("#")]
    try:
        sigma = float(body[0].split("\t")[1])
        _, n_classes, n_features = body[1].split("\t")
        classes = tuple(body[2].split("\t")[1:])
        theta = np.array([[float(v) for v in ln.split()] for ln in body[3:3 + int(n_classes)]])
        if theta.shape != (int(n_classes), int(n_features)):
            raise ValueError(f"theta has shape {theta.shape}")
    except (ValueError, IndexError) as exc:
        raise InputError(f"{path}: malformed model file ({exc})") from exc
    return ModelParameters(theta, sigma), classes
