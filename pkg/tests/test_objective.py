import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from robust_gefl.corpus import Corpus, SparseDocument, Vocabulary
from robust_gefl.errors import InputError, NumericalError
from robust_gefl.knowledge import LabeledFeatureSet, NEUTRAL, neutral_features
from robust_gefl.model import ModelParameters
from robust_gefl.objective import (GEObjective, RegularizationConfig, canonical_method, ge_fl_objective, kl,
                                   regularized_objective)

from conftest import central_difference, max_relative_error, random_instance

METHODS = ["none", "neutral", "max_entropy", "kl_divergence"]


def _config(method, beta, ref, neutral):
    return RegularizationConfig(method, beta, tuple(ref) if method == "kl_divergence" else None,
                                neutral if method == "neutral" else None)


def test_kl_examples():
    assert kl([1 / 3] * 3, [1 / 3] * 3) == 0.0
    assert kl([0.9, 0.1], [0.5, 0.5]) == pytest.approx(0.9 * math.log(1.8) + 0.1 * math.log(0.2), abs=1e-15)
    assert kl([0.9, 0.1], [0.5, 0.5]) == pytest.approx(0.368064, abs=1e-6)
    assert kl([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)
    with pytest.raises(NumericalError):
        kl([0.5, 0.5], [1.0, 0.0])


dist = st.lists(st.floats(0.0, 1.0), min_size=2, max_size=6).filter(lambda v: sum(v) > 1e-3)


@given(p=dist, q=dist)
def test_kl_non_negative(p, q):
    n = min(len(p), len(q))
    p, q = np.array(p[:n]), np.array(q[:n]) + 1e-3
    p, q = p / p.sum(), q / q.sum()
    if p.sum() == 0:
        return
    assert kl(p, q) >= -1e-15
    assert abs(kl(p, p)) <= 1e-12


def _one_feature_corpus():
    vocab = Vocabulary(("good", "film"))
    docs = (SparseDocument(((0, 1), (1, 1)), 0), SparseDocument(((1, 2),), 1))
    return Corpus(docs, vocab, ("neg", "pos"))


def test_ge_fl_value_at_origin():
    corpus = _one_feature_corpus()
    labeled = LabeledFeatureSet((0,), np.array([[0.9, 0.1]]))
    report = ge_fl_objective(ModelParameters.zeros(2, 2), corpus, labeled)
    assert report.ge_fl_kl == pytest.approx(0.9 * math.log(1.8) + 0.1 * math.log(0.2), abs=1e-15)
    assert report.l2 == 0.0 and report.regularizer == 0.0
    assert report.total == report.ge_fl_kl


def test_l2_term_and_its_gradient():
    corpus = _one_feature_corpus()
    labeled = LabeledFeatureSet((0,), np.array([[0.5, 0.5]]))
    theta = np.array([[0.3, -0.2], [0.1, 0.4]])
    report = ge_fl_objective(ModelParameters(theta, sigma=2.0), corpus, labeled)
    assert report.l2 == pytest.approx(np.sum(theta ** 2) / 8.0, rel=1e-15)
    # with uniform target at theta = 0 the KL gradient vanishes and so does the L2 one
    zero = ge_fl_objective(ModelParameters.zeros(2, 2), corpus, labeled)
    assert np.all(zero.gradient == 0.0)


def test_max_entropy_minimum_at_uniform():
    corpus = _one_feature_corpus()
    labeled = LabeledFeatureSet((0,), np.array([[0.9, 0.1]]))
    report = regularized_objective(ModelParameters.zeros(2, 2), corpus, labeled,
                                   RegularizationConfig("max_entropy", beta=3.0))
    lam = 3.0 * 1
    assert report.regularizer == pytest.approx(-lam * math.log(2), abs=1e-14)


def test_kl_term_at_origin():
    corpus = _one_feature_corpus()
    labeled = LabeledFeatureSet((0,), np.array([[0.9, 0.1]]))
    config = RegularizationConfig("kl_divergence", beta=2.0, reference=(0.2, 0.8))
    report = regularized_objective(ModelParameters.zeros(2, 2), corpus, labeled, config)
    expected = 2.0 * (0.2 * math.log(0.4) + 0.8 * math.log(1.6))
    assert report.regularizer == pytest.approx(expected, abs=1e-14)
    assert report.regularizer / 2.0 == pytest.approx(0.192745, abs=1e-6)


def test_neutral_term_has_no_lambda():
    corpus = _one_feature_corpus()
    labeled = LabeledFeatureSet((0,), np.array([[0.9, 0.1]]))
    neutral = LabeledFeatureSet((1,), np.array([[0.5, 0.5]]), NEUTRAL)
    theta = np.array([[0.5, 0.2], [-0.1, 0.0]])
    a = regularized_objective(ModelParameters(theta), corpus, labeled,
                              RegularizationConfig("neutral", beta=1.0, neutral=neutral))
    b = regularized_objective(ModelParameters(theta), corpus, labeled,
                              RegularizationConfig("neutral", beta=50.0, neutral=neutral))
    assert a.regularizer == b.regularizer
    # "film" occurs in both documents: score gaps are (0.5 + 0.2) - (-0.1) and 2 * 0.2
    probs = [1 / (1 + math.exp(-0.8)), 1 / (1 + math.exp(-0.4))]
    q = np.mean(probs)
    assert a.regularizer == pytest.approx(kl([0.5, 0.5], [q, 1 - q]), abs=1e-14)


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("method", METHODS)
def test_gradient_matches_finite_differences(method, seed):
    rng = np.random.default_rng(1000 + seed)
    corpus, labeled, neutral, ref, theta = random_instance(rng)
    obj = GEObjective(corpus, labeled, _config(method, 1.5, ref, neutral), sigma=1.3)
    analytic = obj.evaluate(theta).gradient.ravel()
    numeric = central_difference(lambda x: obj(x)[0], theta)
    assert max_relative_error(analytic, numeric) < 1e-4


@pytest.mark.parametrize("method", ["max_entropy", "kl_divergence"])
def test_beta_zero_reduces_to_ge_fl(method, rng):
    corpus, labeled, neutral, ref, theta = random_instance(rng)
    base = GEObjective(corpus, labeled, sigma=1.0).evaluate(theta)
    other = GEObjective(corpus, labeled, _config(method, 0.0, ref, neutral)).evaluate(theta)
    assert other.total == base.total
    assert np.array_equal(other.gradient, base.gradient)


@pytest.mark.parametrize("method", ["max_entropy", "kl_divergence"])
def test_doubling_beta_doubles_regularizer(method, rng):
    corpus, labeled, neutral, ref, theta = random_instance(rng)
    base = GEObjective(corpus, labeled).evaluate(theta)
    one = GEObjective(corpus, labeled, _config(method, 1.0, ref, neutral)).evaluate(theta)
    two = GEObjective(corpus, labeled, _config(method, 2.0, ref, neutral)).evaluate(theta)
    assert two.regularizer == pytest.approx(2 * one.regularizer, rel=1e-12)
    np.testing.assert_allclose(two.gradient - base.gradient, 2 * (one.gradient - base.gradient),
                               rtol=1e-9, atol=1e-12)


@given(seed=st.integers(0, 10_000), method=st.sampled_from(METHODS))
def test_decomposition_and_descent(seed, method):
    rng = np.random.default_rng(seed)
    corpus, labeled, neutral, ref, theta = random_instance(rng)
    obj = GEObjective(corpus, labeled, _config(method, 2.0, ref, neutral))
    report = obj.evaluate(theta)
    assert abs(report.total - (report.ge_fl_kl + report.l2 + report.regularizer)) <= 1e-10
    g = report.gradient
    step = 1e-6 / max(1.0, float(np.linalg.norm(g)))
    assert obj.evaluate(theta - step * g).total <= report.total


def test_lambda_counts_labeled_features(rng):
    corpus, labeled, neutral, ref, theta = random_instance(rng)
    obj = GEObjective(corpus, labeled, RegularizationConfig("kl", 5.0, tuple(ref)))
    assert obj.lam == 5.0 * len(labeled)
    assert GEObjective(corpus, labeled).lam == 0.0


def test_absent_labeled_feature_policy(caplog):
    vocab = Vocabulary(("aa", "bb", "cc"))
    docs = (SparseDocument(((0, 1),), 0), SparseDocument(((1, 1),), 1))
    corpus = Corpus(docs, vocab, ("a", "b"))
    labeled = LabeledFeatureSet((0, 2), np.array([[0.9, 0.1], [0.1, 0.9]]))
    obj = GEObjective(corpus, labeled)
    assert len(obj.labeled) == 1 and "absent" in caplog.text
    with pytest.raises(InputError):
        GEObjective(corpus, labeled, missing="error")
    with pytest.raises(InputError):
        GEObjective(corpus, LabeledFeatureSet((2,), np.array([[0.9, 0.1]])))
    with pytest.raises(InputError):
        GEObjective(corpus, LabeledFeatureSet.empty(2))


def test_config_validation():
    with pytest.raises(InputError):
        RegularizationConfig("kl_divergence", 1.0)
    with pytest.raises(InputError):
        RegularizationConfig("neutral", 1.0)
    with pytest.raises(InputError):
        RegularizationConfig("max_entropy", -1.0)
    with pytest.raises(InputError):
        RegularizationConfig("kl", 1.0, (0.3, 0.3))
    with pytest.raises(InputError):
        canonical_method("posterior_regularization")
    assert canonical_method("GE-FL") == "none"
    assert canonical_method("kl") == "kl_divergence"


def test_repeated_evaluation_is_bit_identical(rng):
    corpus, labeled, _, ref, theta = random_instance(rng, max_docs=5)
    neutral = neutral_features(corpus, 2)
    for method in METHODS:
        obj = GEObjective(corpus, labeled, _config(method, 1.0, ref, neutral))
        a, b = obj.evaluate(theta), obj.evaluate(theta)
        assert a.total == b.total and np.array_equal(a.gradient, b.gradient)
