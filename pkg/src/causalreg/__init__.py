"""Logistic regression with separate L2 penalties for causal, spurious and remaining features."""

from .core import (
    EPS_CLIP,
    FeatureGroups,
    LinearModel,
    PenaltyConfig,
    bce_loss,
    gradient,
    grouped_penalty,
    predict_proba,
    total_loss,
)
from .errors import CausalRegError, ConfigError, DataError, NumericalError
from .optim import AdamState, TrainConfig, TrainResult, adam_step, train

__version__ = "0.1.0"
