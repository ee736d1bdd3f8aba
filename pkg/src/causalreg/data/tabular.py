"""Tabular records: min-max scaling and one-hot encoding fitted on the training split."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..errors import ConfigError, DataError
from .bundle import DatasetBundle, assemble_splits
from .text import resolve_token_groups

log = logging.getLogger(__name__)

COLUMN_KINDS = ("numeric", "categorical", "label", "sensitive", "split", "pair_id", "ignore")
DEFAULT_SPLIT_FRACTIONS = (0.5, 0.2, 0.3)


@dataclass
class TabularSchema:
    """Column kinds plus the statistics learned from training rows.

    ``sensitive`` columns are one-hot encoded like categoricals when
    ``encode_sensitive`` is set, and are always carried alongside the
    design matrix for fairness evaluation.
    """

    kinds: dict
    encode_sensitive: bool = True
    numeric_range: dict = field(default_factory=dict)
    categories: dict = field(default_factory=dict)

    def __post_init__(self):
        bad = {c: k for c, k in self.kinds.items() if k not in COLUMN_KINDS}
        if bad:
            raise ConfigError(f"unknown column kinds: {bad}")
        labels = [c for c, k in self.kinds.items() if k == "label"]
        if len(labels) != 1:
            raise ConfigError(f"schema needs exactly one label column, found {labels}")
        if sum(k == "sensitive" for k in self.kinds.values()) > 1:
            raise ConfigError("at most one sensitive column is supported")

    def columns_of(self, *kinds: str) -> list[str]:
        return [c for c, k in self.kinds.items() if k in kinds]

    @property
    def label_column(self) -> str:
        return self.columns_of("label")[0]

    @property
    def sensitive_column(self) -> str | None:
        cols = self.columns_of("sensitive")
        return cols[0] if cols else None

    def _onehot_columns(self) -> list[str]:
        kinds = ("categorical", "sensitive") if self.encode_sensitive else ("categorical",)
        return self.columns_of(*kinds)

    def fit(self, records: Sequence[Mapping[str, object]]) -> "TabularSchema":
        if not records:
            raise DataError("cannot fit schema on zero rows")
        self.numeric_range = {}
        for col in self.columns_of("numeric"):
            vals = np.array([_to_float(r[col], col) for r in records])
            self.numeric_range[col] = (float(vals.min()), float(vals.max()))
        self.categories = {}
        for col in self._onehot_columns():
            self.categories[col] = sorted({str(r[col]) for r in records})
        return self

    @property
    def feature_names(self) -> list[str]:
        names = []
        for col, kind in self.kinds.items():
            if kind == "numeric":
                names.append(col)
            elif col in self.categories:
                names.extend(f"{col}={v}" for v in self.categories[col])
        return names

    def transform(self, records: Sequence[Mapping[str, object]]) -> np.ndarray:
        if not self.numeric_range and self.columns_of("numeric"):
            raise DataError("schema has not been fitted")
        blocks = []
        for col, kind in self.kinds.items():
            if kind == "numeric":
                lo, hi = self.numeric_range[col]
                vals = np.array([_to_float(r[col], col) for r in records])
                scaled = (vals - lo) / (hi - lo) if hi > lo else np.zeros_like(vals)
                blocks.append(np.clip(scaled, 0.0, 1.0)[:, None])
            elif col in self.categories:
                cats = self.categories[col]
                pos = {v: j for j, v in enumerate(cats)}
                block = np.zeros((len(records), len(cats)))
                unseen = 0
                for i, r in enumerate(records):
                    j = pos.get(str(r[col]))
                    if j is None:
                        unseen += 1
                    else:
                        block[i, j] = 1.0
                if unseen:
                    log.warning("column %s: %d rows with unseen categories encoded as all-zero", col, unseen)
                blocks.append(block)
        if not blocks:
            return np.zeros((len(records), 0))
        return np.hstack(blocks)

    def labels(self, records) -> np.ndarray:
        col = self.label_column
        out = []
        for i, r in enumerate(records):
            v = str(r[col]).strip().lower()
            if v in ("1", "1.0", "true", "yes"):
                out.append(1)
            elif v in ("0", "0.0", "false", "no"):
                out.append(0)
            else:
                raise DataError(f"row {i}: label {r[col]!r} in column {col} is not binary")
        return np.array(out, dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "kinds": dict(self.kinds),
            "encode_sensitive": self.encode_sensitive,
            "numeric_range": {k: list(v) for k, v in self.numeric_range.items()},
            "categories": dict(self.categories),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TabularSchema":
        schema = cls(dict(data["kinds"]), bool(data.get("encode_sensitive", True)))
        schema.numeric_range = {k: tuple(v) for k, v in data.get("numeric_range", {}).items()}
        schema.categories = {k: list(v) for k, v in data.get("categories", {}).items()}
        return schema


def _to_float(value, col) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise DataError(f"column {col}: {value!r} is not numeric") from None
    if not np.isfinite(out):
        raise DataError(f"column {col}: non-finite value {value!r}")
    return out


def encode_tabular(records, schema: TabularSchema):
    """Encode rows with a fitted schema -> (X, y, sensitive column or None)."""
    X = schema.transform(records)
    y = schema.labels(records)
    col = schema.sensitive_column
    sens = None if col is None else np.array([str(r[col]) for r in records], dtype=object)
    return X, y, sens


def load_schema(path: str | Path) -> TabularSchema:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    kinds = data.get("columns", data.get("kinds"))
    if not isinstance(kinds, dict):
        raise ConfigError(f"{path}: schema must have a 'columns' object mapping column -> kind")
    return TabularSchema(kinds, bool(data.get("encode_sensitive", True)))


def load_records(path: str | Path) -> list[dict]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def random_split_tags(n: int, seed: int, fractions=DEFAULT_SPLIT_FRACTIONS) -> list[str]:
    """Shuffle rows into train/validation/test with the given fractions."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    tags = np.empty(n, dtype=object)
    tags[order[:n_train]] = "train"
    tags[order[n_train : n_train + n_val]] = "validation"
    tags[order[n_train + n_val :]] = "test"
    return list(tags)


def build_tabular_bundle(
    records: Sequence[Mapping[str, object]],
    schema: TabularSchema,
    group_spec: Mapping[str, Sequence[str]] | None = None,
    split_seed: int = 0,
    refit: bool = True,
) -> DatasetBundle:
    """Encode records into a bundle; the schema is fitted on the training rows
    unless `refit` is False and it already carries fitted statistics."""
    missing = [c for c in schema.kinds if records and c not in records[0]]
    if missing:
        raise DataError(f"columns declared in schema but absent from data: {missing}")
    split_col = schema.columns_of("split")
    if split_col:
        tags = [str(r[split_col[0]]).strip() for r in records]
    else:
        tags = random_split_tags(len(records), split_seed)
    pair_col = schema.columns_of("pair_id")
    pairs = [str(r[pair_col[0]]) for r in records] if pair_col else None

    if refit or not (schema.numeric_range or schema.categories):
        schema.fit([r for r, t in zip(records, tags) if t == "train"])
    X, y, sens = encode_tabular(records, schema)
    parts = assemble_splits(X, y, tags, pairs, sensitive=sens)
    names = schema.feature_names
    sens_values = None
    if sens is not None:
        values = sorted(set(parts["train"].sensitive))
        if len(values) < 2:
            raise DataError("sensitive column needs at least two distinct values")
        sens_values = tuple(values[:2])
    return DatasetBundle(
        train=parts["train"],
        validation=parts["validation"],
        test=parts["test"],
        feature_names=names,
        groups=resolve_token_groups(group_spec or {}, names),
        kind="tabular",
        sensitive_name=schema.sensitive_column,
        sensitive_values=sens_values,
        encoder=schema,
    )
