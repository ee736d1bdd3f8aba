"""Logistic model, cross-entropy loss and the per-group L2 penalty.

The training objective is

    mean_i BCE(sigmoid(<x_i, w> + b), y_i)
        + lambda_c/|C| * sum_{c in C} w_c^2
        + lambda_s/|S| * sum_{s in S} w_s^2
        + lambda_r/|R| * sum_{r in R} w_r^2

where C, S and R partition the feature indices into causal, spurious and
remaining features. The bias is never penalized and an empty group adds
nothing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .errors import ConfigError, DataError

EPS_CLIP = 1e-12
"""Probabilities are clamped to [EPS_CLIP, 1 - EPS_CLIP] before taking logs."""

_P_MIN = np.finfo(np.float64).tiny
_P_MAX = 1.0 - np.finfo(np.float64).epsneg

GROUP_NAMES = ("causal", "spurious", "remaining")


def _as_index_tuple(values: Iterable[int]) -> tuple[int, ...]:
    out = tuple(sorted(int(v) for v in values))
    if len(set(out)) != len(out):
        raise ConfigError(f"duplicate feature indices in group: {out}")
    return out


@dataclass(frozen=True)
class FeatureGroups:
    """Partition of feature indices into causal, spurious and remaining sets."""

    causal: tuple[int, ...]
    spurious: tuple[int, ...]
    remaining: tuple[int, ...]

    def __post_init__(self):
        for name in GROUP_NAMES:
            object.__setattr__(self, name, _as_index_tuple(getattr(self, name)))
        seen: dict[int, str] = {}
        for name in GROUP_NAMES:
            for i in getattr(self, name):
                if i < 0:
                    raise ConfigError(f"negative feature index {i} in {name}")
                if i in seen:
                    raise ConfigError(
                        f"feature {i} is in both {seen[i]} and {name} groups"
                    )
                seen[i] = name

    @classmethod
    def from_labeled(
        cls, n_features: int, causal: Iterable[int] = (), spurious: Iterable[int] = ()
    ) -> "FeatureGroups":
        """Build groups where every unlabeled index is 'remaining'."""
        causal = set(int(i) for i in causal)
        spurious = set(int(i) for i in spurious)
        bad = [i for i in causal | spurious if not 0 <= i < n_features]
        if bad:
            raise ConfigError(f"feature indices out of range [0, {n_features}): {sorted(bad)}")
        remaining = set(range(n_features)) - causal - spurious
        return cls(tuple(causal), tuple(spurious), tuple(remaining))

    @classmethod
    def single(cls, n_features: int, name: str = "remaining") -> "FeatureGroups":
        """All features in one group."""
        parts = {g: () for g in GROUP_NAMES}
        parts[name] = tuple(range(n_features))
        return cls(**parts)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.causal), len(self.spurious), len(self.remaining)

    @property
    def n_features(self) -> int:
        return sum(self.sizes)

    def check_partition(self, n_features: int) -> None:
        """Raise unless the groups cover exactly 0..n_features-1."""
        if self.n_features != n_features:
            raise ConfigError(
                f"groups cover {self.n_features} features, model has {n_features}"
            )
        all_idx = self.causal + self.spurious + self.remaining
        if max(all_idx, default=-1) >= n_features:
            raise ConfigError(f"group index {max(all_idx)} out of range for d={n_features}")

    def labels(self) -> np.ndarray:
        """Per-feature group name, as an object array of length d."""
        out = np.empty(self.n_features, dtype=object)
        for name in GROUP_NAMES:
            out[list(getattr(self, name))] = name
        return out

    def remove(self, drop: Iterable[int]) -> "FeatureGroups":
        """Groups after deleting the columns in `drop`, re-indexed densely."""
        drop = set(int(i) for i in drop)
        keep = [i for i in range(self.n_features) if i not in drop]
        new_index = {old: new for new, old in enumerate(keep)}
        parts = {
            name: tuple(new_index[i] for i in getattr(self, name) if i in new_index)
            for name in GROUP_NAMES
        }
        return FeatureGroups(**parts)

    def to_dict(self) -> dict:
        return {name: list(getattr(self, name)) for name in GROUP_NAMES}

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureGroups":
        return cls(*(tuple(data.get(name, ())) for name in GROUP_NAMES))


@dataclass(frozen=True)
class PenaltyConfig:
    lambda_c: float = 0.0
    lambda_s: float = 0.0
    lambda_r: float = 0.0

    def __post_init__(self):
        for name, value in zip(("lambda_c", "lambda_s", "lambda_r"), self.as_tuple()):
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be a finite non-negative number, got {value}")
            object.__setattr__(self, name, float(value))

    @classmethod
    def uniform(cls, lam: float) -> "PenaltyConfig":
        return cls(lam, lam, lam)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.lambda_c, self.lambda_s, self.lambda_r)

    def satisfies_ordering(self) -> bool:
        """lambda_s >= lambda_r >= lambda_c with lambda_s > lambda_c."""
        c, s, r = self.as_tuple()
        return s >= r >= c and s > c

    def check_constraint(self) -> None:
        if not self.satisfies_ordering():
            raise ConfigError(
                f"penalty {self.as_tuple()} violates lambda_s >= lambda_r >= lambda_c, "
                "lambda_s > lambda_c"
            )


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).ravel()
        self.bias = float(self.bias)

    @classmethod
    def zeros(cls, n_features: int) -> "LinearModel":
        return cls(np.zeros(n_features), 0.0)

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "LinearModel":
        return LinearModel(self.weights.copy(), self.bias)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.weights)) and np.isfinite(self.bias))

    def group_weights(self, groups: FeatureGroups, name: str) -> np.ndarray:
        return self.weights[list(getattr(groups, name))]

    def decision_function(self, X) -> np.ndarray:
        return logits(self, X)

    def predict_proba(self, X) -> np.ndarray:
        return predict_proba(self, X)

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (predict_proba(self, X) >= threshold).astype(np.int64)


def _check_dim(model: LinearModel, X) -> None:
    d = X.shape[-1] if X.ndim else 0
    if d != model.n_features:
        raise DataError(f"feature dimension mismatch: input has {d}, model has {model.n_features}")


def logits(model: LinearModel, X) -> np.ndarray:
    if not sp.issparse(X):
        X = np.asarray(X, dtype=np.float64)
    _check_dim(model, X)
    z = X @ model.weights
    return np.asarray(z, dtype=np.float64) + model.bias


def sigmoid(z) -> np.ndarray:
    """Logistic function, clipped so results stay strictly inside (0, 1)."""
    return np.clip(expit(z), _P_MIN, _P_MAX)


def predict_proba(model: LinearModel, X) -> np.ndarray | float:
    """sigmoid(<x, w> + b) for a single row (returns float) or a matrix."""
    single = not sp.issparse(X) and np.ndim(X) == 1
    p = sigmoid(logits(model, X))
    return float(p) if single else p


def bce_loss(probs, labels) -> float:
    probs = np.asarray(probs, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if probs.size == 0:
        raise DataError("bce_loss of empty input")
    if probs.shape != labels.shape:
        raise DataError(f"length mismatch: {probs.size} probabilities, {labels.size} labels")
    p = np.clip(probs, EPS_CLIP, 1.0 - EPS_CLIP)
    return float(-np.mean(labels * np.log(p) + (1.0 - labels) * np.log1p(-p)))


def penalty_coefficients(groups: FeatureGroups, cfg: PenaltyConfig) -> np.ndarray:
    """Per-feature multiplier lambda_g/|G| of w_i^2."""
    coef = np.zeros(groups.n_features)
    for name, lam in zip(GROUP_NAMES, cfg.as_tuple()):
        idx = list(getattr(groups, name))
        if idx:
            coef[idx] = lam / len(idx)
    return coef


def grouped_penalty(model: LinearModel, groups: FeatureGroups, cfg: PenaltyConfig) -> float:
    groups.check_partition(model.n_features)
    total = 0.0
    for name, lam in zip(GROUP_NAMES, cfg.as_tuple()):
        idx = list(getattr(groups, name))
        if not idx or lam == 0.0:
            continue
        w = model.weights[idx]
        total += lam / len(idx) * float(np.dot(w, w))
    return total


def total_loss(model: LinearModel, X, y, groups: FeatureGroups, cfg: PenaltyConfig) -> float:
    return bce_loss(predict_proba(model, X), y) + grouped_penalty(model, groups, cfg)


def gradient(
    model: LinearModel, X, y, groups: FeatureGroups, cfg: PenaltyConfig
) -> tuple[np.ndarray, float]:
    """Analytic gradient of `total_loss` with respect to (weights, bias)."""
    _, grad_w, grad_b = loss_and_gradient(model, X, y, groups, cfg)
    return grad_w, grad_b


def loss_and_gradient(
    model: LinearModel, X, y, groups: FeatureGroups, cfg: PenaltyConfig, coef=None
) -> tuple[float, np.ndarray, float]:
    """`total_loss` and its gradient from a single forward pass.

    `coef` may carry precomputed `penalty_coefficients(groups, cfg)`.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    n = X.shape[0]
    if n == 0:
        raise DataError("gradient of empty batch")
    if y.shape[0] != n:
        raise DataError(f"shape mismatch: {n} rows, {y.shape[0]} labels")
    if coef is None:
        groups.check_partition(model.n_features)
        coef = penalty_coefficients(groups, cfg)
    p = predict_proba(model, X)
    resid = p - y
    grad_w = np.asarray(X.T @ resid, dtype=np.float64).ravel() / n
    grad_w += 2.0 * coef * model.weights
    loss = bce_loss(p, y) + grouped_penalty(model, groups, cfg)
    return loss, grad_w, float(resid.mean())
