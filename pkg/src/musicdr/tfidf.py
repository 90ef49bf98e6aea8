"""Sparse lexical baseline: tf-idf vectors ranked by dot product.

The model is fitted on the retrieval corpus (canonical descriptor keys)
only; requests are transformed with that model and out-of-vocabulary
tokens are dropped. Weighting is the standard smoothed scheme
idf = ln((1 + N) / (1 + df)) + 1 with raw term counts, L2-normalized.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels

# Maximal runs of letters/digits; '&', '-' and friends all separate,
# so "r&b" -> ["r", "b"] and "k-pop" -> ["k", "pop"].
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class NoTokensError(Exception):
    """No fitting document produced a single token."""


def tokenize(text: str) -> list[str]:
    """Lowercase and split into maximal letter/digit runs, order preserved."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class SparseVector:
    """L2-normalized sparse vector: ascending indices with their weights."""

    indices: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.indices.shape[0])


EMPTY_VECTOR = SparseVector(
    indices=np.empty(0, dtype=np.int64), values=np.empty(0, dtype=np.float64)
)


@dataclass(frozen=True)
class TfIdfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    n_docs: int


def fit(docs: Sequence[str]) -> TfIdfModel:
    """Fit vocabulary and idf weights over the given documents.

    Vocabulary indices are assigned in sorted token order, which makes the
    model (and every downstream vector) a pure function of the doc set.
    """
    if not docs:
        raise ValueError("docs must be non-empty")
    df: Counter[str] = Counter()
    for doc in docs:
        df.update(set(tokenize(doc)))
    if not df:
        raise NoTokensError("no document produced any token")
    vocabulary = {token: idx for idx, token in enumerate(sorted(df))}
    n_docs = len(docs)
    idf = np.empty(len(vocabulary), dtype=np.float64)
    for token, idx in vocabulary.items():
        idf[idx] = math.log((1 + n_docs) / (1 + df[token])) + 1.0
    return TfIdfModel(vocabulary=vocabulary, idf=idf, n_docs=n_docs)


def transform(model: TfIdfModel, text: str) -> SparseVector:
    """Vectorize text: raw counts x idf, L2-normalized, OOV dropped."""
    counts = Counter(tokenize(text))
    pairs = sorted(
        (model.vocabulary[token], count)
        for token, count in counts.items()
        if token in model.vocabulary
    )
    if not pairs:
        return EMPTY_VECTOR
    indices = np.array([idx for idx, _ in pairs], dtype=np.int64)
    weights = np.array([count for _, count in pairs], dtype=np.float64) * model.idf[indices]
    norm = math.sqrt(float(weights @ weights))
    return SparseVector(indices=indices, values=weights / norm)


def dot(a: SparseVector, b: SparseVector) -> float:
    """Dot product over matching indices; 0.0 when supports are disjoint."""
    return kernels.sparse_dot(a.indices, a.values, b.indices, b.values)


def model_to_json(model: TfIdfModel) -> str:
    """Inspection dump (vocabulary + idf); not a stability-guaranteed format."""
    return json.dumps(
        {
            "n_docs": model.n_docs,
            "vocabulary": model.vocabulary,
            "idf": model.idf.tolist(),
        },
        ensure_ascii=False,
    )


def model_from_json(text: str) -> TfIdfModel:
    obj = json.loads(text)
    return TfIdfModel(
        vocabulary={str(k): int(v) for k, v in obj["vocabulary"].items()},
        idf=np.asarray(obj["idf"], dtype=np.float64),
        n_docs=int(obj["n_docs"]),
    )


class SparseDescriptorIndex:
    """Descriptor index backed by a fitted tf-idf model and CSR row storage."""

    def __init__(self, keys: tuple[str, ...], model: TfIdfModel) -> None:
        self.keys = keys
        self.model = model
        vectors = [transform(model, key) for key in keys]
        self._indptr = np.zeros(len(keys) + 1, dtype=np.int64)
        self._indptr[1:] = np.cumsum([v.nnz for v in vectors])
        if vectors:
            self._indices = np.concatenate([v.indices for v in vectors])
            self._data = np.concatenate([v.values for v in vectors])
        else:
            self._indices = np.empty(0, dtype=np.int64)
            self._data = np.empty(0, dtype=np.float64)

    def score_request(self, request: str) -> np.ndarray:
        vector = transform(self.model, request)
        dense_query = np.zeros(len(self.model.vocabulary), dtype=np.float64)
        dense_query[vector.indices] = vector.values
        return kernels.sparse_scores(self._indptr, self._indices, self._data, dense_query)


class TfIdfEncoder:
    """Encoder plugged into ranker.build_index for the sparse baseline."""

    name = "tfidf"

    def make_index(self, keys: tuple[str, ...]) -> SparseDescriptorIndex:
        return SparseDescriptorIndex(keys, fit(keys))


def save_model(model: TfIdfModel, path: str | Path) -> None:
    Path(path).write_text(model_to_json(model), encoding="utf-8")


def load_model(path: str | Path) -> TfIdfModel:
    return model_from_json(Path(path).read_text(encoding="utf-8"))
