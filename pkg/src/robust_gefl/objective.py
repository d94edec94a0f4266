"""Training objective for learning from labeled features, with analytic gradients.

The base objective is the labeled-feature term plus a Gaussian prior::

    O = sum_{k in K} KL(p_hat(y|x_k) || p(y|x_k)) + sum_{y,i} theta[y,i]^2 / (2 sigma^2)

where ``p(y|x_k)`` averages the model's predictions over the documents that
contain word ``k``. Three optional regularizers are added on top:

* ``neutral``: the same KL term over neutral words, with uniform targets and
  no weight;
* ``max_entropy``: ``lam * sum_y p(y) log p(y)``;
* ``kl_divergence``: ``lam * KL(p_ref(y) || p(y))``;

with ``p(y)`` the mean prediction over the training documents and
``lam = beta * |K|``.

All terms are written as a sensitivity ``dL/dP`` with respect to the
per-document prediction matrix ``P``; one softmax backward pass then turns
the summed sensitivities into the parameter gradient.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus
from .errors import InputError, NumericalError
from .knowledge import LabeledFeatureSet, NEUTRAL
from .model import ModelParameters, predict_matrix

log = logging.getLogger(__name__)

NONE = "none"
METHODS = (NONE, "neutral", "max_entropy", "kl_divergence")
_ALIASES = {
    "ge_fl": NONE, "ge-fl": NONE, "gefl": NONE, "none": NONE,
    "neutral": "neutral", "ne": "neutral",
    "max_entropy": "max_entropy", "max-entropy": "max_entropy", "me": "max_entropy",
    "kl_divergence": "kl_divergence", "kl-divergence": "kl_divergence", "kl": "kl_divergence",
}


def canonical_method(name: str) -> str:
    try:
        return _ALIASES[name.strip().lower()]
    except KeyError:
        raise InputError(f"unknown method {name!r}; expected one of {sorted(_ALIASES)}") from None


def kl(p, q) -> float:
    """``sum_i p_i ln(p_i / q_i)`` with ``0 ln 0 = 0``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise InputError("kl: distributions differ in length")
    support = p > 0
    if np.any(q[support] <= 0):
        raise NumericalError("kl: q is zero where p is positive")
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


def _kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    support = p > 0
    if np.any(q[support] <= 0):
        raise NumericalError("feature-conditional prediction underflowed to zero")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(support, p * np.log(np.where(support, p, 1.0) / np.where(support, q, 1.0)), 0.0)
    return terms.sum(axis=1)


@dataclass(frozen=True)
class RegularizationConfig:
    method: str = NONE
    beta: float = 5.0
    reference: tuple[float, ...] | None = None
    neutral: LabeledFeatureSet | None = None

    def __post_init__(self):
        object.__setattr__(self, "method", canonical_method(self.method))
        if not self.beta >= 0:
            raise InputError("beta must be non-negative")
        if self.reference is not None:
            ref = tuple(float(v) for v in self.reference)
            if any(v < 0 for v in ref) or abs(sum(ref) - 1.0) > 1e-9:
                raise InputError(f"reference class distribution must sum to 1: {ref}")
            object.__setattr__(self, "reference", ref)
        if self.method == "kl_divergence" and self.reference is None:
            raise InputError("kl_divergence needs a reference class distribution")
        if self.method == "neutral":
            if self.neutral is None or len(self.neutral) == 0:
                raise InputError("neutral method needs a non-empty neutral feature set")
            if self.neutral.role != NEUTRAL:
                raise InputError("neutral feature set must have role 'neutral'")


@dataclass
class ObjectiveReport:
    total: float
    ge_fl_kl: float
    l2: float
    regularizer: float
    gradient: np.ndarray = field(repr=False)


class _FeatureTerm:
    """Sum over features of KL(target_k || mean prediction over docs containing k)."""

    def __init__(self, corpus: Corpus, features: LabeledFeatureSet, missing: str):
        ids = np.asarray(features.features, dtype=np.int64)
        targets = features.distributions
        df = corpus.document_frequency[ids] if ids.size else np.zeros(0, dtype=np.int64)
        absent = df == 0
        if np.any(absent):
            names = [corpus.vocabulary[i] for i in ids[absent]]
            msg = f"{features.role} features absent from the training documents: {names}"
            if missing == "error":
                raise InputError(msg)
            log.warning("%s; skipped", msg)
            ids, targets, df = ids[~absent], targets[~absent], df[~absent]
        self.ids = ids
        self.targets = targets
        self.counts = df.astype(float)
        self.occurrence = corpus.occurrence[:, ids].tocsr()

    def __len__(self) -> int:
        return self.ids.size

    def conditionals(self, probs: np.ndarray) -> np.ndarray:
        return np.asarray(self.occurrence.T @ probs) / self.counts[:, None]

    def value_and_sensitivity(self, probs: np.ndarray) -> tuple[float, np.ndarray]:
        if len(self) == 0:
            return 0.0, np.zeros_like(probs)
        q = self.conditionals(probs)
        value = float(_kl_rows(self.targets, q).sum())
        with np.errstate(divide="ignore", invalid="ignore"):
            dq = np.where(self.targets > 0, -self.targets / q, 0.0)
        sens = np.asarray(self.occurrence @ (dq / self.counts[:, None]))
        return value, sens


class GEObjective:
    """Objective oracle over a fixed training corpus and fixed prior knowledge.

    ``missing`` controls labeled features that never occur in the corpus:
    ``"warn"`` skips them, ``"error"`` raises. For the max-entropy and KL
    methods ``lam`` is ``beta`` times the number of labeled features that
    actually enter the objective; it is 0 for the other methods.
    """

    def __init__(self, corpus: Corpus, labeled: LabeledFeatureSet,
                 config: RegularizationConfig | None = None, sigma: float = 1.0, missing: str = "warn"):
        if config is None:
            config = RegularizationConfig()
        if not sigma > 0:
            raise InputError("sigma must be positive")
        labeled.validate_for(corpus)
        self.corpus = corpus
        self.config = config
        self.sigma = float(sigma)
        self.counts = corpus.counts
        self.n_docs = len(corpus)
        self.shape = (corpus.n_classes, corpus.n_features)
        self.labeled = _FeatureTerm(corpus, labeled, missing)
        if len(self.labeled) == 0:
            raise InputError("no labeled feature occurs in the training documents")
        self.neutral = None
        if config.method == "neutral":
            config.neutral.validate_for(corpus)
            self.neutral = _FeatureTerm(corpus, config.neutral, missing)
        weighted = config.method in ("max_entropy", "kl_divergence")
        self.lam = config.beta * len(self.labeled) if weighted else 0.0
        if config.reference is not None and len(config.reference) != corpus.n_classes:
            raise InputError("reference class distribution has the wrong number of classes")
        self.reference = None if config.reference is None else np.asarray(config.reference)

    @property
    def n_params(self) -> int:
        return self.shape[0] * self.shape[1]

    def evaluate(self, theta: np.ndarray) -> ObjectiveReport:
        theta = np.asarray(theta, dtype=float).reshape(self.shape)
        if not np.all(np.isfinite(theta)):
            raise NumericalError("non-finite model parameter")
        probs = predict_matrix(theta, self.counts)

        ge_value, sens = self.labeled.value_and_sensitivity(probs)
        reg_value = 0.0
        method = self.config.method
        if method == "neutral":
            reg_value, reg_sens = self.neutral.value_and_sensitivity(probs)
            sens = sens + reg_sens
        elif method in ("max_entropy", "kl_divergence") and self.lam != 0.0:
            marginal = probs.mean(axis=0)
            if np.any(marginal <= 0):
                raise NumericalError("predicted class marginal underflowed to zero")
            if method == "max_entropy":
                reg_value = self.lam * float(np.sum(marginal * np.log(marginal)))
                dmarg = self.lam * (np.log(marginal) + 1.0)
            else:
                reg_value = self.lam * kl(self.reference, marginal)
                dmarg = -self.lam * self.reference / marginal
            sens = sens + dmarg[None, :] / self.n_docs

        # softmax backward: dL/ds[x, y'] = P[x, y'] * (S[x, y'] - sum_y S[x, y] P[x, y])
        resid = probs * (sens - np.sum(sens * probs, axis=1, keepdims=True))
        grad = np.asarray(self.counts.T @ resid).T
        l2 = float(np.sum(theta * theta)) / (2.0 * self.sigma ** 2)
        grad = grad + theta / self.sigma ** 2
        total = ge_value + l2 + reg_value
        if not (np.isfinite(total) and np.all(np.isfinite(grad))):
            raise NumericalError("non-finite objective or gradient")
        return ObjectiveReport(total, ge_value, l2, reg_value, grad)

    def __call__(self, flat: np.ndarray) -> tuple[float, np.ndarray]:
        report = self.evaluate(flat)
        return report.total, report.gradient.ravel()

    def class_marginal(self, theta: np.ndarray) -> np.ndarray:
        return predict_matrix(np.asarray(theta).reshape(self.shape), self.counts).mean(axis=0)


def ge_fl_objective(params: ModelParameters, corpus: Corpus, labeled: LabeledFeatureSet,
                    missing: str = "warn") -> ObjectiveReport:
    return GEObjective(corpus, labeled, RegularizationConfig(), params.sigma, missing).evaluate(params.theta)


def regularized_objective(params: ModelParameters, corpus: Corpus, labeled: LabeledFeatureSet,
                          config: RegularizationConfig, missing: str = "warn") -> ObjectiveReport:
    return GEObjective(corpus, labeled, config, params.sigma, missing).evaluate(params.theta)
