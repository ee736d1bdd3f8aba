"""Adam with validation-loss early stopping for the grouped-penalty model."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    FeatureGroups,
    LinearModel,
    PenaltyConfig,
    loss_and_gradient,
    penalty_coefficients,
    total_loss,
)
from .errors import ConfigError, DataError, NumericalError

log = logging.getLogger(__name__)

BASE_LEARNING_RATE = 0.001


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n_params: int) -> "AdamState":
        return cls(np.zeros(n_params), np.zeros(n_params))


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray, lr: float):
    """One Adam update. Returns new params; `state` is updated in place."""
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != params.shape or state.m.shape != params.shape:
        raise DataError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}"
        )
    bad = np.flatnonzero(~np.isfinite(grads))
    if bad.size:
        raise NumericalError(f"non-finite gradient at index {int(bad[0])}: {grads[bad[0]]}")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    return params - lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class TrainConfig:
    learning_rate: float = BASE_LEARNING_RATE
    patience: int = 10
    max_epochs: int = 500
    batch_size: Optional[int] = None  # None = full batch
    seed: int = 0
    adjust_lr: bool = True
    init_scale: float = 0.01

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")

    def effective_lr(self, cfg: PenaltyConfig) -> float:
        return penalty_scaled_lr(self.learning_rate, cfg) if self.adjust_lr else self.learning_rate


def penalty_scaled_lr(base_lr: float, cfg: PenaltyConfig) -> float:
    """Shrink the step size for strong penalties: base / max(1, log10(1 + max lambda))."""
    return base_lr / max(1.0, math.log10(1.0 + max(cfg.as_tuple())))


@dataclass
class TrainResult:
    model: LinearModel
    epochs_run: int
    train_loss_history: list = field(default_factory=list)
    val_loss_history: list = field(default_factory=list)
    stopped_early: bool = False
    best_epoch: int = 0
    learning_rate: float = BASE_LEARNING_RATE


def _step(state, params, gw, gb, lr, epoch):
    try:
        return adam_step(state, params, np.append(gw, gb), lr)
    except NumericalError as exc:
        raise NumericalError(f"training diverged at epoch {epoch} (lr={lr:g}): {exc}") from exc


def init_model(n_features: int, tcfg: TrainConfig) -> LinearModel:
    rng = np.random.default_rng(tcfg.seed)
    return LinearModel(rng.normal(0.0, tcfg.init_scale, size=n_features), 0.0)


def train(
    X_train,
    y_train,
    X_val,
    y_val,
    groups: FeatureGroups,
    cfg: PenaltyConfig,
    tcfg: TrainConfig | None = None,
    init: LinearModel | None = None,
) -> TrainResult:
    """Fit weights by Adam on the penalized loss.

    Each epoch is one pass over the training rows (one step when
    `batch_size` is None). After every epoch the penalized loss is
    evaluated on the validation rows; training stops once it has failed to
    improve for `patience` epochs, and the best validation snapshot is
    returned.
    """
    tcfg = tcfg or TrainConfig()
    y_train = np.asarray(y_train, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)
    n, d = X_train.shape
    if X_val.shape[0] == 0:
        raise DataError("validation set is empty")
    if X_val.shape[1] != d:
        raise DataError(f"validation has {X_val.shape[1]} features, training has {d}")
    if y_train.shape[0] != n or y_val.shape[0] != X_val.shape[0]:
        raise DataError("label vector length does not match its feature matrix")
    groups.check_partition(d)

    model = init.copy() if init is not None else init_model(d, tcfg)
    lr = tcfg.effective_lr(cfg)
    rng = np.random.default_rng([tcfg.seed, 1])
    state = AdamState.fresh(d + 1)
    params = np.append(model.weights, model.bias)

    best = np.inf
    best_model = model.copy()
    best_epoch = 0
    wait = 0
    train_hist: list[float] = []
    val_hist: list[float] = []
    stopped = False
    epoch = 0
    coef = penalty_coefficients(groups, cfg)
    full_batch = tcfg.batch_size is None or tcfg.batch_size >= n
    if full_batch:
        # the forward pass that yields the epoch's train loss also yields the next gradient
        _, gw, gb = loss_and_gradient(model, X_train, y_train, groups, cfg, coef)
    for epoch in range(1, tcfg.max_epochs + 1):
        if full_batch:
            params = _step(state, params, gw, gb, lr, epoch)
            model = LinearModel(params[:-1], params[-1])
            tr, gw, gb = loss_and_gradient(model, X_train, y_train, groups, cfg, coef)
        else:
            order = rng.permutation(n)
            for i in range(0, n, tcfg.batch_size):
                idx = order[i : i + tcfg.batch_size]
                _, bw, bb = loss_and_gradient(model, X_train[idx], y_train[idx], groups, cfg, coef)
                params = _step(state, params, bw, bb, lr, epoch)
                model = LinearModel(params[:-1], params[-1])
            tr = total_loss(model, X_train, y_train, groups, cfg)
        va = total_loss(model, X_val, y_val, groups, cfg)
        if not (np.isfinite(tr) and np.isfinite(va)) or not model.is_finite():
            raise NumericalError(f"training diverged at epoch {epoch} (lr={lr:g}): loss is NaN/Inf")
        train_hist.append(tr)
        val_hist.append(va)
        if va < best:
            best, best_model, best_epoch, wait = va, model.copy(), epoch, 0
        else:
            wait += 1
            if wait >= tcfg.patience:
                stopped = True
                break

    log.debug("trained %d epochs (best %d, lr %g, penalty %s)", epoch, best_epoch, lr, cfg.as_tuple())
    return TrainResult(
        model=best_model,
        epochs_run=epoch,
        train_loss_history=train_hist,
        val_loss_history=val_hist,
        stopped_early=stopped,
        best_epoch=best_epoch,
        learning_rate=lr,
    )
