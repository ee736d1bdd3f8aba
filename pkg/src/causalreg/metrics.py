"""Accuracy, F1, group-fairness gaps and the causal share of top weights."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .core import FeatureGroups, LinearModel
from .errors import DataError

log = logging.getLogger(__name__)

THRESHOLD = 0.5


def to_predictions(scores, threshold: float = THRESHOLD) -> np.ndarray:
    """Hard 0/1 predictions; probability inputs are thresholded at 0.5."""
    scores = np.asarray(scores)
    if scores.dtype.kind in "biu" and np.isin(scores, (0, 1)).all():
        return scores.astype(np.int64)
    return (scores >= threshold).astype(np.int64)


def _pair(preds, labels):
    preds = to_predictions(preds).ravel()
    labels = np.asarray(labels).astype(np.int64).ravel()
    if preds.size == 0:
        raise DataError("metric of empty input")
    if preds.shape != labels.shape:
        raise DataError(f"length mismatch: {preds.size} predictions, {labels.size} labels")
    return preds, labels


def accuracy(preds, labels) -> float:
    preds, labels = _pair(preds, labels)
    return float(np.mean(preds == labels))


def f1(preds, labels) -> float:
    """F1 of the positive class; 0 when there are no predicted or true positives."""
    preds, labels = _pair(preds, labels)
    tp = int(np.sum((preds == 1) & (labels == 1)))
    fp = int(np.sum((preds == 1) & (labels == 0)))
    fn = int(np.sum((preds == 0) & (labels == 1)))
    if tp + fp + fn == 0:
        log.info("F1 undefined (no predicted or actual positives); reporting 0")
        return 0.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def _group_masks(sens, groups: tuple[Hashable, Hashable] | None):
    sens = np.asarray(sens, dtype=object).ravel()
    if groups is None:
        values = sorted(set(sens.tolist()), key=str)
        if len(values) < 2:
            raise DataError("fairness metrics need at least two sensitive groups")
        groups = (values[0], values[1])
    i, j = groups
    return sens == i, sens == j, groups


def _counts(preds, mask) -> tuple[int, int]:
    n = int(mask.sum())
    if n == 0:
        raise DataError("sensitive group is empty")
    return int(np.sum(preds[mask] == 1)), n


def positive_rate(preds, mask) -> float:
    c, n = _counts(preds, mask)
    return c / n


def _rate_gap(preds, mask_i, mask_j) -> float:
    """rate_i - rate_j from integer counts, so the result is correctly rounded."""
    ci, ni = _counts(preds, mask_i)
    cj, nj = _counts(preds, mask_j)
    return (ci * nj - cj * ni) / (ni * nj)


def delta_eo(preds, labels, sens, groups=None) -> float:
    """|P(yhat=1 | S=i, y=1) - P(yhat=1 | S=j, y=1)|."""
    preds, labels = _pair(preds, labels)
    mi, mj, groups = _group_masks(sens, groups)
    if len(mi) != len(preds):
        raise DataError("sensitive column length does not match predictions")
    pos = labels == 1
    for g, m in zip(groups, (mi, mj)):
        if not (m & pos).any():
            raise DataError(f"group {g!r} has no positive-label rows; equal opportunity undefined")
    return abs(_rate_gap(preds, mi & pos, mj & pos))


def signed_dp(preds, sens, groups=None) -> float:
    preds = to_predictions(preds).ravel()
    mi, mj, _ = _group_masks(sens, groups)
    if len(mi) != len(preds):
        raise DataError("sensitive column length does not match predictions")
    return _rate_gap(preds, mi, mj)


def delta_dp(preds, sens, groups=None) -> float:
    """|P(yhat=1 | S=i) - P(yhat=1 | S=j)|."""
    return abs(signed_dp(preds, sens, groups))


@dataclass
class FairnessReport:
    delta_eo: float
    delta_dp: float
    signed_dp: float
    groups: tuple
    positive_rate: dict = field(default_factory=dict)
    true_positive_rate: dict = field(default_factory=dict)


def fairness_report(preds, labels, sens, groups=None) -> FairnessReport:
    preds, labels = _pair(preds, labels)
    mi, mj, groups = _group_masks(sens, groups)
    pos = labels == 1
    return FairnessReport(
        delta_eo=delta_eo(preds, labels, sens, groups),
        delta_dp=delta_dp(preds, sens, groups),
        signed_dp=signed_dp(preds, sens, groups),
        groups=tuple(groups),
        positive_rate={str(g): positive_rate(preds, m) for g, m in zip(groups, (mi, mj))},
        true_positive_rate={str(g): positive_rate(preds, m & pos) for g, m in zip(groups, (mi, mj))},
    )


def top_features(weights, n: int) -> np.ndarray:
    """Indices of the n largest |weight|, ties broken by lower index."""
    w = np.abs(np.asarray(weights, dtype=np.float64))
    if not 0 <= n <= w.size:
        raise DataError(f"n={n} outside [0, {w.size}]")
    return np.argsort(-w, kind="stable")[:n]


def causal_fraction_topn(model: LinearModel, groups: FeatureGroups, n_list: Sequence[int]) -> dict:
    causal = np.zeros(model.n_features, dtype=bool)
    causal[list(groups.causal)] = True
    out = {}
    for n in n_list:
        top = top_features(model.weights, n)
        out[int(n)] = float(causal[top].sum()) / n if n else 0.0
    return out


def counterfactual_accuracy(model: LinearModel, ctf) -> float:
    """Accuracy on counterfactual rows (a PairedDataset or an (X, y) pair)."""
    if ctf is None:
        raise DataError("no counterfactual split")
    X, y = (ctf.X, ctf.y) if hasattr(ctf, "X") else ctf
    if X.shape[0] == 0:
        raise DataError("counterfactual split is empty")
    return accuracy(model.predict(X), y)
