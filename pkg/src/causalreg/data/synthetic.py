"""Synthetic datasets with planted causal, spurious and noise features.

`synth_generate` mimics a counterfactually augmented text corpus: binary
bag-of-words-like features where the label is a linear threshold of the
causal features, spurious features agree with the label at a chosen rate,
and each row's counterfactual twin flips every causal feature (and hence
the label) while leaving the spurious and remaining features untouched.

`synth_admission` mimics a law-school admission table: two noisy test
scores, a binary gender attribute that historically shifted admission
odds, and a few nuisance columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import FeatureGroups
from ..errors import ConfigError
from .bundle import DatasetBundle, PairedDataset
from .embeddings import EmbeddingTable
from .tabular import TabularSchema, build_tabular_bundle
from .text import Corpus

SPLIT_FRACTIONS = (0.6, 0.2, 0.2)


@dataclass(frozen=True)
class SynthConfig:
    n: int = 4000
    d: int = 200
    n_causal: int = 20
    n_spurious: int = 30
    spurious_train_corr: float = 0.9
    flip_noise: float = 0.05
    causal_rate: float = 0.5
    spurious_rate: float = 0.02
    remaining_rate: float = 0.1

    def check(self) -> None:
        if self.n < 10:
            raise ConfigError(f"n must be at least 10, got {self.n}")
        if self.n_causal < 1 or self.n_spurious < 0:
            raise ConfigError("need at least one causal feature and a non-negative spurious count")
        if self.n_causal + self.n_spurious > self.d:
            raise ConfigError(
                f"n_causal + n_spurious = {self.n_causal + self.n_spurious} exceeds d = {self.d}"
            )
        for name in ("spurious_train_corr", "flip_noise", "causal_rate", "remaining_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 <= self.spurious_rate <= 0.5:
            raise ConfigError(f"spurious_rate must lie in [0, 0.5], got {self.spurious_rate}")


def synth_feature_names(cfg: SynthConfig) -> list[str]:
    n_rem = cfg.d - cfg.n_causal - cfg.n_spurious
    return (
        [f"causal{i:03d}" for i in range(cfg.n_causal)]
        + [f"spurious{i:03d}" for i in range(cfg.n_spurious)]
        + [f"other{i:03d}" for i in range(n_rem)]
    )


def synth_generate(seed: int = 0, cfg: SynthConfig | None = None, **overrides) -> DatasetBundle:
    """Generate a paired dataset with ground-truth feature groups.

    Columns are laid out causal first, then spurious, then remaining.
    Train, validation and test rows share the same spurious/label
    agreement rate; their twins (``ctf_*`` splits) see the reverse rate,
    so a model that leans on spurious features fails on them.
    """
    cfg = SynthConfig(**{**(cfg.__dict__ if cfg else {}), **overrides})
    cfg.check()
    rng = np.random.default_rng(seed)
    nc, ns = cfg.n_causal, cfg.n_spurious
    nr = cfg.d - nc - ns

    # planted rule: half the causal features push positive, half negative
    signs = np.where(np.arange(nc) % 2 == 0, 1.0, -1.0)
    beta = signs * rng.uniform(0.5, 1.5, size=nc)
    spur_polarity = np.arange(ns) % 2  # 1: present with positives, 0: with negatives

    Xc = (rng.random((cfg.n, nc)) < cfg.causal_rate).astype(np.float64)
    score = (2.0 * Xc - 1.0) @ beta
    y = (score > 0).astype(np.int64)
    noise = rng.random(cfg.n) < cfg.flip_noise
    y = np.where(noise, 1 - y, y)

    # a spurious token shows up in a fraction spurious_rate of documents and,
    # when present, matches its polarity class with probability spurious_train_corr
    matches = (y[:, None] == spur_polarity[None, :])
    p_present = np.where(
        matches, 2.0 * cfg.spurious_rate * cfg.spurious_train_corr,
        2.0 * cfg.spurious_rate * (1.0 - cfg.spurious_train_corr),
    )
    Xs = (rng.random((cfg.n, ns)) < p_present).astype(np.float64)
    Xr = (rng.random((cfg.n, nr)) < cfg.remaining_rate).astype(np.float64)

    X = np.hstack([Xc, Xs, Xr])
    X_twin = np.hstack([1.0 - Xc, Xs, Xr])
    y_twin = 1 - y

    order = rng.permutation(cfg.n)
    n_train = int(round(SPLIT_FRACTIONS[0] * cfg.n))
    n_val = int(round(SPLIT_FRACTIONS[1] * cfg.n))
    cuts = {
        "train": order[:n_train],
        "validation": order[n_train : n_train + n_val],
        "test": order[n_train + n_val :],
    }
    parts = {}
    names = synth_feature_names(cfg)
    for split, rows in cuts.items():
        rows = np.sort(rows)
        twin = PairedDataset(X=X_twin[rows], y=y_twin[rows])
        parts[split] = PairedDataset(X=X[rows], y=y[rows], twin=twin)
    return DatasetBundle(
        train=parts["train"],
        validation=parts["validation"],
        test=parts["test"],
        feature_names=names,
        groups=FeatureGroups(tuple(range(nc)), tuple(range(nc, nc + ns)), tuple(range(nc + ns, cfg.d))),
        kind="synthetic",
        meta={
            "seed": seed,
            "config": dict(cfg.__dict__),
            "causal_coefficients": beta.tolist(),
            "spurious_polarity": spur_polarity.tolist(),
        },
    )


def _docs_from_rows(X: np.ndarray, names: list[str]) -> list[str]:
    return [" ".join(names[j] for j in np.flatnonzero(row)) for row in X]


def synth_corpus(bundle: DatasetBundle) -> Corpus:
    """Render a synthetic bundle as a token corpus (one token per active feature)."""
    docs, labels, splits, pairs = [], [], [], []
    names = bundle.feature_names
    for split in ("train", "validation", "test"):
        part = bundle.split(split)
        for i, doc in enumerate(_docs_from_rows(part.X, names)):
            docs.append(doc)
            labels.append(int(part.y[i]))
            splits.append(split)
            pairs.append(f"{split}-{i}" if part.twin is not None else "")
        if part.twin is not None:
            for i, doc in enumerate(_docs_from_rows(part.twin.X, names)):
                docs.append(doc)
                labels.append(int(part.twin.y[i]))
                splits.append("ctf_" + split)
                pairs.append(f"{split}-{i}")
    return Corpus(docs, labels, splits, pairs)


def synth_group_spec(bundle: DatasetBundle) -> dict:
    names = bundle.feature_names
    return {
        "causal": [names[i] for i in bundle.groups.causal],
        "spurious": [names[i] for i in bundle.groups.spurious],
    }


def synth_embeddings(names: list[str], dim: int = 16, seed: int = 0) -> EmbeddingTable:
    """Random Gaussian vectors for each token, as a stand-in for a GloVe file."""
    rng = np.random.default_rng([seed, 7])
    return EmbeddingTable({t: rng.normal(0.0, 1.0, size=dim) for t in names}, dim)


ADMISSION_SCHEMA = {
    "lsat": "numeric",
    "gpa": "numeric",
    "resident": "categorical",
    "year": "categorical",
    "gender": "sensitive",
    "race": "categorical",
    "urm": "categorical",
    "admit": "label",
}
ADMISSION_GROUPS = {"causal": ["lsat", "gpa"], "spurious": ["gender"]}


def synth_admission_records(
    seed: int = 0,
    n: int = 40000,
    merit_gap: float = 0.1,
    label_bias: float = 0.25,
    score_noise: float = 1.0,
    decision_noise: float = 0.9,
    cutoff: float = 0.3,
) -> list[dict]:
    """Admission-like rows built around a latent merit score.

    LSAT and GPA are independent noisy measurements of merit. Men have
    slightly higher average merit (`merit_gap`) and past decisions also
    favoured them directly (`label_bias`). A model that sees gender picks
    up both effects and opens large opportunity and parity gaps; a
    gender-blind model loses little accuracy because the scores already
    carry most of the signal.
    """
    rng = np.random.default_rng(seed)
    male = rng.random(n) < 0.5
    merit = rng.normal(0.0, 1.0, n) + merit_gap * male
    lsat = np.clip(np.round(155.0 + 8.0 * (merit + rng.normal(0.0, score_noise, n))), 120, 180)
    gpa = np.clip(np.round(3.2 + 0.4 * (merit + rng.normal(0.0, score_noise, n)), 2), 1.0, 4.0)
    gender = np.where(male, "M", "F")
    race = rng.choice(["asian", "black", "hispanic", "white"], size=n, p=[0.1, 0.1, 0.1, 0.7])
    urm = np.where(np.isin(race, ["black", "hispanic"]), "1", "0")
    resident = np.where(rng.random(n) < 0.3, "yes", "no")
    year = rng.choice(["2005", "2006", "2007"], size=n)
    decision = merit + label_bias * male + rng.normal(0.0, decision_noise, n)
    admit = (decision > cutoff).astype(int)
    return [
        {
            "lsat": f"{lsat[i]:g}",
            "gpa": f"{gpa[i]:.2f}",
            "resident": resident[i],
            "year": year[i],
            "gender": gender[i],
            "race": race[i],
            "urm": urm[i],
            "admit": str(admit[i]),
        }
        for i in range(n)
    ]


def synth_admission(seed: int = 0, n: int = 40000, **kwargs) -> DatasetBundle:
    """Admission-like tabular bundle with gender as the sensitive, spurious column."""
    records = synth_admission_records(seed=seed, n=n, **kwargs)
    schema = TabularSchema(dict(ADMISSION_SCHEMA))
    return build_tabular_bundle(records, schema, ADMISSION_GROUPS, split_seed=seed)
