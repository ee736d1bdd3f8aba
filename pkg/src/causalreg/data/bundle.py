"""Containers for split datasets with optional counterfactual twins."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from ..core import FeatureGroups
from ..errors import DataError

log = logging.getLogger(__name__)

ORIGINAL_SPLITS = ("train", "validation", "test")
TWIN_PREFIX = "ctf_"


@dataclass
class PairedDataset:
    """Feature matrix and labels, plus an optional row-aligned counterfactual twin.

    ``twin`` (when present) holds, row for row, the counterfactually edited
    version of each row with the opposite label. ``sensitive`` carries the
    sensitive attribute value per row for fairness metrics.
    """

    X: Any
    y: np.ndarray
    sensitive: Optional[np.ndarray] = None
    twin: Optional["PairedDataset"] = None
    tokens: Optional[list] = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.int64).ravel()
        if self.X.shape[0] != self.y.shape[0]:
            raise DataError(f"{self.X.shape[0]} rows but {self.y.shape[0]} labels")
        if not np.isin(self.y, (0, 1)).all():
            raise DataError("labels must be 0/1")
        if self.sensitive is not None:
            self.sensitive = np.asarray(self.sensitive, dtype=object)
            if self.sensitive.shape[0] != self.y.shape[0]:
                raise DataError("sensitive column length does not match labels")
        if self.twin is not None:
            if self.twin.y.shape != self.y.shape:
                raise DataError("counterfactual twin split is not row-aligned")
            if np.any(self.twin.y == self.y):
                bad = np.flatnonzero(self.twin.y == self.y)[:10].tolist()
                raise DataError(f"counterfactual twins must flip the label; rows {bad} do not")

    def __len__(self) -> int:
        return self.y.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def take(self, idx) -> "PairedDataset":
        idx = np.asarray(idx)
        return PairedDataset(
            X=self.X[idx],
            y=self.y[idx],
            sensitive=None if self.sensitive is None else self.sensitive[idx],
            twin=None if self.twin is None else self.twin.take(idx),
            tokens=None if self.tokens is None else [self.tokens[i] for i in idx],
        )

    def with_columns_removed(self, drop: Sequence[int]) -> "PairedDataset":
        keep = np.setdiff1d(np.arange(self.n_features), np.asarray(list(drop), dtype=np.int64))
        return replace(
            self,
            X=self.X[:, keep],
            twin=None if self.twin is None else self.twin.with_columns_removed(drop),
        )


@dataclass
class DatasetBundle:
    train: PairedDataset
    validation: PairedDataset
    test: PairedDataset
    feature_names: list
    groups: FeatureGroups
    kind: str = "tabular"
    sensitive_name: Optional[str] = None
    sensitive_values: Optional[tuple] = None
    encoder: Any = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        d = len(self.feature_names)
        for name in ORIGINAL_SPLITS:
            part = getattr(self, name)
            if part.n_features != d:
                raise DataError(f"{name} split has {part.n_features} features, expected {d}")
        self.groups.check_partition(d)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def split(self, name: str) -> PairedDataset:
        """Split by tag, including ``ctf_validation`` / ``ctf_test`` twins."""
        if name in ORIGINAL_SPLITS:
            return getattr(self, name)
        if name.startswith(TWIN_PREFIX) and name[len(TWIN_PREFIX):] in ORIGINAL_SPLITS:
            twin = getattr(self, name[len(TWIN_PREFIX):]).twin
            if twin is None:
                raise DataError(f"dataset has no {name} split")
            return twin
        raise DataError(f"unknown split {name!r}")

    def has_split(self, name: str) -> bool:
        try:
            self.split(name)
        except DataError:
            return False
        return True

    def with_features_removed(self, drop: Sequence[int]) -> "DatasetBundle":
        drop = sorted(set(int(i) for i in drop))
        drop_set = set(drop)
        return replace(
            self,
            train=self.train.with_columns_removed(drop),
            validation=self.validation.with_columns_removed(drop),
            test=self.test.with_columns_removed(drop),
            feature_names=[f for i, f in enumerate(self.feature_names) if i not in drop_set],
            groups=self.groups.remove(drop),
        )


def remove_features(X, feature_names: Sequence[str], groups: FeatureGroups, drop: Sequence[int]):
    """Delete columns `drop`; return (X, names, groups) re-indexed consistently."""
    drop_set = set(int(i) for i in drop)
    bad = [i for i in drop_set if not 0 <= i < X.shape[1]]
    if bad:
        raise DataError(f"column indices out of range: {sorted(bad)}")
    keep = [i for i in range(X.shape[1]) if i not in drop_set]
    return (
        X[:, keep],
        [feature_names[i] for i in keep],
        groups.remove(drop_set),
    )


def augment_with_counterfactuals(data: PairedDataset) -> PairedDataset:
    """Originals stacked on top of their counterfactual twins."""
    if data.twin is None:
        raise DataError("no counterfactual pairing present; cannot augment")
    twin = data.twin
    stack = sp.vstack if sp.issparse(data.X) else np.vstack
    X = stack([data.X, twin.X])
    if sp.issparse(X):
        X = X.tocsr()
    sens = None
    if data.sensitive is not None and twin.sensitive is not None:
        sens = np.concatenate([data.sensitive, twin.sensitive])
    tokens = None
    if data.tokens is not None and twin.tokens is not None:
        tokens = list(data.tokens) + list(twin.tokens)
    return PairedDataset(X=X, y=np.concatenate([data.y, twin.y]), sensitive=sens, tokens=tokens)


def pair_rows(split_tags: Sequence[str], pair_ids: Sequence, labels: Sequence[int]) -> dict[int, int]:
    """Map each row to its twin via shared pair ids.

    Returns an involution {i: j, j: i}. Rows with an empty pair id are
    unpaired. Raises DataError if a pair id is shared by other than two
    rows, or if paired rows carry the same label.
    """
    by_id: dict[str, list[int]] = {}
    for i, pid in enumerate(pair_ids):
        if pid is None or str(pid).strip() == "":
            continue
        by_id.setdefault(str(pid), []).append(i)
    twin: dict[int, int] = {}
    for pid, rows in by_id.items():
        if len(rows) == 1:
            continue
        if len(rows) != 2:
            raise DataError(f"pair id {pid!r} is shared by {len(rows)} rows")
        a, b = rows
        if labels[a] == labels[b]:
            raise DataError(f"pair id {pid!r}: counterfactual twins have the same label")
        twin[a], twin[b] = b, a
    return twin


def assemble_splits(
    X_all,
    y_all: np.ndarray,
    split_tags: Sequence[str],
    pair_ids: Sequence | None = None,
    sensitive: np.ndarray | None = None,
    tokens: list | None = None,
) -> dict[str, PairedDataset]:
    """Group rows by split tag, attaching ``ctf_<split>`` rows as row-aligned twins."""
    tags = np.asarray([str(t) for t in split_tags], dtype=object)
    y_all = np.asarray(y_all, dtype=np.int64)
    twin = pair_rows(tags, pair_ids, y_all) if pair_ids is not None else {}
    unknown = set(tags) - set(ORIGINAL_SPLITS) - {TWIN_PREFIX + s for s in ORIGINAL_SPLITS}
    if unknown:
        raise DataError(f"unknown split tags: {sorted(unknown)}")

    def subset(rows) -> PairedDataset:
        rows = np.asarray(rows, dtype=np.int64)
        return PairedDataset(
            X=X_all[rows],
            y=y_all[rows],
            sensitive=None if sensitive is None else np.asarray(sensitive, dtype=object)[rows],
            tokens=None if tokens is None else [tokens[i] for i in rows],
        )

    out: dict[str, PairedDataset] = {}
    for name in ORIGINAL_SPLITS:
        rows = np.flatnonzero(tags == name)
        part = subset(rows)
        twin_rows = [twin.get(int(i)) for i in rows]
        paired = [t is not None for t in twin_rows]
        if any(paired):
            if not all(paired):
                unpaired = [int(r) for r, ok in zip(rows, paired) if not ok][:20]
                raise DataError(f"{name}: some rows have counterfactual twins and others not: {unpaired}")
            wrong = [int(t) for t in twin_rows if tags[t] != TWIN_PREFIX + name]
            if wrong:
                raise DataError(f"{name}: twins must be tagged {TWIN_PREFIX + name}; rows {wrong[:10]}")
            part.twin = subset(twin_rows)
            part.__post_init__()
        out[name] = part
    orphans = [
        i for i, t in enumerate(tags) if t.startswith(TWIN_PREFIX) and i not in twin
    ]
    if orphans:
        log.warning("%d counterfactual rows have no original and are ignored", len(orphans))
    return out
