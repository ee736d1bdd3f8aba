"""GloVe-format embedding tables and (group-weighted) mean document vectors."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..core import FeatureGroups
from ..errors import ConfigError, DataError, NumericalError
from .bundle import DatasetBundle, PairedDataset

log = logging.getLogger(__name__)


@dataclass
class EmbeddingTable:
    vectors: dict
    dim: int

    def __post_init__(self):
        for tok, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise DataError(f"embedding for {tok!r} has shape {vec.shape}, expected ({self.dim},)")

    def lookup(self, token: str) -> np.ndarray:
        vec = self.vectors.get(token)
        return np.zeros(self.dim) if vec is None else vec

    def __contains__(self, token) -> bool:
        return token in self.vectors


def load_glove(path: str | Path, vocabulary: Iterable[str] | None = None) -> EmbeddingTable:
    """Read a GloVe text file: one token per line followed by its k floats.

    When `vocabulary` is given, only those tokens are kept.
    """
    keep = None if vocabulary is None else set(vocabulary)
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            tok = parts[0]
            if keep is not None and tok not in keep:
                continue
            try:
                vec = np.array([float(x) for x in parts[1:]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed vector for {tok!r}") from None
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise DataError(f"{path}:{lineno}: expected {dim} values, got {vec.shape[0]}")
            vectors[tok] = vec
    if dim is None:
        raise DataError(f"{path}: no embedding vectors read")
    return EmbeddingTable(vectors, dim)


def write_glove(table: EmbeddingTable, path: str | Path) -> None:
    lines = [" ".join([tok] + [repr(float(x)) for x in vec]) for tok, vec in table.vectors.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class GroupWeights:
    """Multipliers applied to causal, spurious and remaining token vectors."""

    causal: float = 1.0
    spurious: float = 1.0
    remaining: float = 1.0

    def __post_init__(self):
        if min(self.causal, self.spurious, self.remaining) <= 0:
            raise ConfigError(f"group weights must be positive: {self}")

    def for_group(self, name: str) -> float:
        return getattr(self, name)


def embed_document(
    tokens: Sequence[str],
    table: EmbeddingTable,
    token_groups: Mapping[str, str] | None = None,
    weights: GroupWeights = GroupWeights(),
) -> np.ndarray:
    """Mean over tokens of group_weight(token) * vector(token).

    OOV tokens contribute the zero vector; tokens missing from
    `token_groups` use the remaining weight.
    """
    if not tokens:
        return np.zeros(table.dim)
    token_groups = token_groups or {}
    acc = np.zeros(table.dim)
    with np.errstate(over="ignore", invalid="ignore"):
        for tok in tokens:
            acc += weights.for_group(token_groups.get(tok, "remaining")) * table.lookup(tok)
        out = acc / len(tokens)
    if not np.all(np.isfinite(out)):
        raise NumericalError("document embedding overflowed; check embedding values and group weights")
    return out


def token_group_map(feature_names: Sequence[str], groups: FeatureGroups) -> dict[str, str]:
    labels = groups.labels()
    return {name: labels[i] for i, name in enumerate(feature_names)}


def embed_bundle(
    bundle: DatasetBundle, table: EmbeddingTable, weights: GroupWeights = GroupWeights()
) -> DatasetBundle:
    """Replace bag-of-words rows by (weighted) mean embeddings.

    The result has k dense features, all in the remaining group.
    """
    tok_groups = token_group_map(bundle.feature_names, bundle.groups)

    def convert(part: PairedDataset | None) -> PairedDataset | None:
        if part is None:
            return None
        if part.tokens is None:
            raise DataError("embedding representation needs token lists; dataset has none")
        X = np.vstack([embed_document(t, table, tok_groups, weights) for t in part.tokens]) if len(part) else np.zeros((0, table.dim))
        return replace(part, X=X, twin=convert(part.twin))

    return replace(
        bundle,
        train=convert(bundle.train),
        validation=convert(bundle.validation),
        test=convert(bundle.test),
        feature_names=[f"emb_{i}" for i in range(table.dim)],
        groups=FeatureGroups.single(table.dim),
        kind="embedding",
        meta={**bundle.meta, "embedding_weights": [weights.causal, weights.spurious, weights.remaining]},
    )
