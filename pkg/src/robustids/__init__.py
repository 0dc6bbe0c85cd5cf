"""Adversarially robust boosted-tree intrusion detection for flow records.

Stages: flow CSV / synthetic data (``flowdata``), preprocessing and splits
(``preprocess``), the boosted-tree classifier (``gbdt``), the differentiable
surrogate (``surrogate``), sign-gradient attacks (``attack``), robust
retraining (``advtrain``), evaluation reports (``metrics``), and the
operator CLI (``cli``).
"""

from . import advtrain, attack, cli, errors, flowdata, gbdt, metrics, preprocess, surrogate
from .attack import AttackConfig
from .flowdata import FlowSchema, FlowTable, SynthSpec
from .gbdt import Ensemble, Hyperparams
from .preprocess import FeatureMatrix, PreprocessStats, SplitIndices
from .surrogate import SurrogateParams, SurrogateTrainCfg

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "Ensemble",
    "FeatureMatrix",
    "FlowSchema",
    "FlowTable",
    "Hyperparams",
    "PreprocessStats",
    "SplitIndices",
    "SurrogateParams",
    "SurrogateTrainCfg",
    "SynthSpec",
    "__version__",
    "advtrain",
    "attack",
    "cli",
    "errors",
    "flowdata",
    "gbdt",
    "metrics",
    "preprocess",
    "surrogate",
]
