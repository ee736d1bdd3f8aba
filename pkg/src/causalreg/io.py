"""Versioned JSON model files and atomic output directories."""

from __future__ import annotations

import json
import os
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import FeatureGroups, LinearModel, PenaltyConfig
from .data.embeddings import EmbeddingTable, GroupWeights
from .data.tabular import TabularSchema
from .data.text import Vocabulary
from .errors import ConfigError, DataError

MODEL_FORMAT = "causalreg-model"
MODEL_VERSION = 1
# files that mark a directory as one of ours, so it may be replaced
OUTPUT_MARKERS = ("report.json", "model.json", "config.json", "annotation.tsv")


@dataclass
class SavedModel:
    """A trained model plus everything needed to featurize new data."""

    model: LinearModel
    feature_names: list
    groups: FeatureGroups
    penalty: PenaltyConfig
    representation: str
    vocabulary: Optional[Vocabulary] = None
    schema: Optional[TabularSchema] = None
    embeddings: Optional[EmbeddingTable] = None
    embedding_weights: Optional[GroupWeights] = None
    token_groups: Optional[FeatureGroups] = None
    token_names: Optional[list] = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "representation": self.representation,
            "weights": self.model.weights.tolist(),
            "bias": self.model.bias,
            "feature_names": list(self.feature_names),
            "groups": self.groups.to_dict(),
            "penalty": list(self.penalty.as_tuple()),
            "meta": self.meta,
        }
        if self.vocabulary is not None:
            out["vocabulary"] = self.vocabulary.tokens
        if self.schema is not None:
            out["schema"] = self.schema.to_dict()
        if self.embeddings is not None:
            out["embeddings"] = {
                "dim": self.embeddings.dim,
                "vectors": {t: v.tolist() for t, v in sorted(self.embeddings.vectors.items())},
            }
        if self.embedding_weights is not None:
            w = self.embedding_weights
            out["embedding_weights"] = [w.causal, w.spurious, w.remaining]
        if self.token_groups is not None:
            out["token_groups"] = self.token_groups.to_dict()
            out["token_names"] = list(self.token_names or [])
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SavedModel":
        if data.get("format") != MODEL_FORMAT:
            raise DataError(f"not a model file (format={data.get('format')!r})")
        if data.get("version") != MODEL_VERSION:
            raise DataError(f"unsupported model file version {data.get('version')!r}")
        try:
            emb = data.get("embeddings")
            return cls(
                model=LinearModel(np.array(data["weights"], dtype=np.float64), data["bias"]),
                feature_names=list(data["feature_names"]),
                groups=FeatureGroups.from_dict(data["groups"]),
                penalty=PenaltyConfig(*data["penalty"]),
                representation=data["representation"],
                vocabulary=Vocabulary.from_tokens(data["vocabulary"]) if "vocabulary" in data else None,
                schema=TabularSchema.from_dict(data["schema"]) if "schema" in data else None,
                embeddings=(
                    EmbeddingTable({t: np.array(v) for t, v in emb["vectors"].items()}, emb["dim"])
                    if emb else None
                ),
                embedding_weights=(
                    GroupWeights(*data["embedding_weights"]) if "embedding_weights" in data else None
                ),
                token_groups=(
                    FeatureGroups.from_dict(data["token_groups"]) if "token_groups" in data else None
                ),
                token_names=data.get("token_names"),
                meta=data.get("meta", {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed model file: {exc}") from exc


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def save_model(saved: SavedModel, path: str | Path) -> None:
    Path(path).write_text(dump_json(saved.to_dict()), encoding="utf-8")


def load_model(path: str | Path) -> SavedModel:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"model file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    return SavedModel.from_dict(data)


@contextmanager
def atomic_output_dir(target: str | Path):
    """Yield a temporary directory that replaces `target` on success.

    On any exception the temporary directory is removed and `target` is
    left as it was. An existing `target` is only replaced when it is empty
    or looks like an earlier output directory.
    """
    target = Path(target)
    if target.exists():
        if not target.is_dir():
            raise ConfigError(f"output path {target} exists and is not a directory")
        if any(target.iterdir()) and not any((target / m).exists() for m in OUTPUT_MARKERS):
            raise ConfigError(f"output directory {target} is not empty and was not written by this tool")
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    old = None
    if target.exists():
        old = target.with_name(f".{target.name}.old-{os.getpid()}")
        os.rename(target, old)
    os.rename(tmp, target)
    if old is not None:
        shutil.rmtree(old, ignore_errors=True)
