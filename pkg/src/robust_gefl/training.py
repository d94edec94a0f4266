"""Fit model parameters by minimizing the regularized objective with L-BFGS."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .knowledge import LabeledFeatureSet
from .model import ModelParameters
from .objective import GEObjective, RegularizationConfig
from .optimizer import OptimizationTrace, OptimizerConfig, minimize


@dataclass
class TrainResult:
    params: ModelParameters
    trace: OptimizationTrace
    objective: GEObjective


def train(corpus: Corpus, labeled: LabeledFeatureSet, config: RegularizationConfig | None = None,
          sigma: float = 1.0, optimizer: OptimizerConfig | None = None, missing: str = "warn") -> TrainResult:
    """Train on ``corpus`` without reading its document labels. Starts from theta = 0 by default."""
    objective = GEObjective(corpus, labeled, config, sigma, missing)
    optimizer = optimizer or OptimizerConfig()
    x0 = optimizer.initial_point
    if x0 is None:
        x0 = np.zeros(objective.n_params)
    x, trace = minimize(objective, optimizer, x0)
    return TrainResult(ModelParameters(x.reshape(objective.shape), sigma), trace, objective)
