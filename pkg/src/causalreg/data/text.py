"""Text corpora: tokenization, binary bag-of-words, loaders."""

from __future__ import annotations

import csv
import logging
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from ..core import FeatureGroups
from ..errors import DataError
from .bundle import DatasetBundle, assemble_splits

log = logging.getLogger(__name__)

_PUNCT = re.compile(r"[^\w\s]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase, delete punctuation, split on whitespace."""
    return _PUNCT.sub("", text.lower()).split()


@dataclass
class Vocabulary:
    index: dict

    @classmethod
    def build(cls, docs: Iterable[Sequence[str]], min_df: int = 1) -> "Vocabulary":
        """Vocabulary of tokens appearing in at least `min_df` documents, sorted."""
        df = Counter()
        for toks in docs:
            df.update(set(toks))
        kept = sorted(t for t, c in df.items() if c >= min_df)
        return cls({t: i for i, t in enumerate(kept)})

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "Vocabulary":
        if len(set(tokens)) != len(tokens):
            raise DataError("vocabulary contains duplicate tokens")
        return cls({t: i for i, t in enumerate(tokens)})

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, token) -> bool:
        return token in self.index

    @property
    def tokens(self) -> list[str]:
        return sorted(self.index, key=self.index.__getitem__)


def vectorize_bow(docs: Sequence[Sequence[str]], vocab: Vocabulary) -> sp.csr_matrix:
    """Binary document-term matrix; out-of-vocabulary tokens are dropped."""
    indptr = [0]
    indices: list[int] = []
    for toks in docs:
        cols = sorted({vocab.index[t] for t in toks if t in vocab.index})
        indices.extend(cols)
        indptr.append(len(indices))
    data = np.ones(len(indices), dtype=np.float64)
    return sp.csr_matrix(
        (data, np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(docs), len(vocab)),
    )


@dataclass
class Corpus:
    documents: list
    labels: list
    split: list
    pair_id: Optional[list] = None

    def __post_init__(self):
        n = len(self.documents)
        if len(self.labels) != n or len(self.split) != n:
            raise DataError("corpus columns have different lengths")
        if self.pair_id is not None and len(self.pair_id) != n:
            raise DataError("pair_id column length does not match")

    def __len__(self) -> int:
        return len(self.documents)

    def counterfactual_of(self) -> dict[int, int]:
        from .bundle import pair_rows

        if self.pair_id is None:
            return {}
        return pair_rows(self.split, self.pair_id, self.labels)


def _parse_label(raw: str, row: int) -> int:
    try:
        value = int(float(raw))
    except (TypeError, ValueError):
        raise DataError(f"row {row}: label {raw!r} is not 0/1") from None
    if value not in (0, 1):
        raise DataError(f"row {row}: label {raw!r} is not 0/1")
    return value


def load_text_corpus(path: str | Path, default_split: str = "train") -> Corpus:
    """Read a UTF-8 TSV with header `text`, `label` and optional `pair_id`, `split`."""
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        if reader.fieldnames is None or not {"text", "label"} <= set(reader.fieldnames):
            raise DataError(f"{path}: TSV header must contain 'text' and 'label'")
        has_pair = "pair_id" in reader.fieldnames
        docs, labels, splits, pairs = [], [], [], []
        for i, row in enumerate(reader, start=2):
            docs.append(row["text"] or "")
            labels.append(_parse_label(row["label"], i))
            splits.append((row.get("split") or default_split).strip())
            pairs.append((row.get("pair_id") or "").strip())
    return Corpus(docs, labels, splits, pairs if has_pair else None)


def write_text_corpus(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    header = ["text", "label", "split"] + (["pair_id"] if corpus.pair_id is not None else [])
    lines = ["\t".join(header)]
    for i, doc in enumerate(corpus.documents):
        row = [" ".join(doc.split()), str(corpus.labels[i]), corpus.split[i]]
        if corpus.pair_id is not None:
            row.append(str(corpus.pair_id[i]))
        lines.append("\t".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def filter_kindle(
    reviews: Iterable[tuple[str, object]],
    min_words: int = 5,
    max_words: int = 40,
    split: str = "train",
) -> Corpus:
    """Keep 5-40 word reviews and label ratings {4,5} positive, {1,2} negative.

    Rating 3 is dropped as neutral. Rows with a rating outside 1-5 are
    rejected with a logged reason.
    """
    docs, labels = [], []
    for i, (text, rating) in enumerate(reviews):
        try:
            r = int(rating)
            if r != float(rating) or not 1 <= r <= 5:
                raise ValueError
        except (TypeError, ValueError):
            log.warning("review %d rejected: malformed rating %r", i, rating)
            continue
        if r == 3:
            continue
        n_words = len(tokenize(text))
        if not min_words <= n_words <= max_words:
            continue
        docs.append(text)
        labels.append(1 if r >= 4 else 0)
    return Corpus(docs, labels, [split] * len(docs))


def load_rated_reviews(path: str | Path, min_words: int = 5, max_words: int = 40) -> Corpus:
    """Read a TSV of `text`, `rating` (1-5) and optional `split`; filter and label it.

    Rows without a split tag go to "train".
    """
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        if reader.fieldnames is None or not {"text", "rating"} <= set(reader.fieldnames):
            raise DataError(f"{path}: TSV header must contain 'text' and 'rating'")
        by_split: dict[str, list] = {}
        for row in reader:
            by_split.setdefault((row.get("split") or "train").strip(), []).append(
                (row["text"] or "", row["rating"])
            )
    docs, labels, splits = [], [], []
    for name in sorted(by_split):
        part = filter_kindle(by_split[name], min_words, max_words, split=name)
        docs += part.documents
        labels += part.labels
        splits += part.split
    return Corpus(docs, labels, splits)


def resolve_token_groups(
    spec: Mapping[str, Sequence[str]], feature_names: Sequence[str]
) -> FeatureGroups:
    """Map a {'causal': [...], 'spurious': [...]} name spec onto column indices.

    A name matches a column with the same name, or every one-hot column
    ``name=<value>`` derived from it. Unknown names are logged and skipped.
    """
    lookup: dict[str, list[int]] = {}
    for i, name in enumerate(feature_names):
        lookup.setdefault(name, []).append(i)
        if "=" in name:
            lookup.setdefault(name.split("=", 1)[0], []).append(i)
    picked: dict[str, set[int]] = {}
    for group in ("causal", "spurious"):
        idx: set[int] = set()
        missing = []
        for name in spec.get(group, []):
            key = str(name).lower() if str(name).lower() in lookup else str(name)
            if key in lookup:
                idx.update(lookup[key])
            else:
                missing.append(name)
        if missing:
            log.warning("%d %s names not found among features (e.g. %s)", len(missing), group, missing[:5])
        picked[group] = idx
    overlap = picked["causal"] & picked["spurious"]
    if overlap:
        names = sorted(feature_names[i] for i in overlap)
        raise DataError(f"features labeled both causal and spurious: {names[:10]}")
    return FeatureGroups.from_labeled(len(feature_names), picked["causal"], picked["spurious"])


def build_text_bundle(
    corpus: Corpus,
    group_spec: Mapping[str, Sequence[str]] | None = None,
    min_df: int = 1,
    vocab: Vocabulary | None = None,
) -> DatasetBundle:
    """Tokenize, fit the vocabulary on the training split, and assemble splits.

    Pass a saved `vocab` to reuse a fitted vocabulary instead.
    """
    tokens = [tokenize(doc) for doc in corpus.documents]
    train_docs = [t for t, s in zip(tokens, corpus.split) if s == "train"]
    if not train_docs:
        raise DataError("corpus has no training rows")
    if vocab is None:
        vocab = Vocabulary.build(train_docs, min_df=min_df)
    X = vectorize_bow(tokens, vocab)
    parts = assemble_splits(X, np.asarray(corpus.labels), corpus.split, corpus.pair_id, tokens=tokens)
    names = vocab.tokens
    groups = resolve_token_groups(group_spec or {}, names)
    return DatasetBundle(
        train=parts["train"],
        validation=parts["validation"],
        test=parts["test"],
        feature_names=names,
        groups=groups,
        kind="text",
        encoder=vocab,
        meta={"min_df": min_df},
    )
