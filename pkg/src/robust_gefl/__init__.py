"""Training text classifiers from labeled features, with regularizers that
keep the model robust to unbalanced prior knowledge."""

from .corpus import Corpus, SparseDocument, Vocabulary, cv_folds, ingest, unbalance
from .errors import GEFLError, InputError, KnowledgeUnderflow, NumericalError
from .knowledge import (FeaturePool, LabeledFeatureSet, draw_labeled, info_gain_pool, neutral_features,
                        reference_heuristic)
from .model import ModelParameters, class_marginal, classify, feature_conditional, predict
from .objective import GEObjective, RegularizationConfig, ge_fl_objective, kl, regularized_objective
from .optimizer import OptimizationTrace, OptimizerConfig, minimize
from .training import train

__version__ = "0.1.0"

__all__ = [
    "Corpus", "SparseDocument", "Vocabulary", "cv_folds", "ingest", "unbalance",
    "GEFLError", "InputError", "KnowledgeUnderflow", "NumericalError",
    "FeaturePool", "LabeledFeatureSet", "draw_labeled", "info_gain_pool", "neutral_features",
    "reference_heuristic",
    "ModelParameters", "class_marginal", "classify", "feature_conditional", "predict",
    "GEObjective", "RegularizationConfig", "ge_fl_objective", "kl", "regularized_objective",
    "OptimizationTrace", "OptimizerConfig", "minimize", "train",
]
