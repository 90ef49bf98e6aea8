"""Exact dot-product ranking of requests against the descriptor-key index.

The index holds the deduplicated canonical keys, sorted ascending. Ranking
scores every key (exhaustive scan: corpora stay in the low thousands of
unique keys, so nothing approximate is needed) and sorts descending with
exact ties broken by ascending key.
"""

from __future__ import annotations

from typing import Iterable, Protocol, Sequence

import numpy as np

from . import kernels
from .corpus import DescriptorSet
from .densevec import Embedder, EmbeddingCache, EmbeddingMatrix, embed


class DescriptorIndex(Protocol):
    """Anything rankable: ascending unique keys plus a full score vector."""

    keys: tuple[str, ...]

    def score_request(self, request: str) -> np.ndarray: ...


class DenseDescriptorIndex:
    """Keys embedded into an EmbeddingMatrix; queries embedded on demand."""

    def __init__(self, keys: tuple[str, ...], matrix: EmbeddingMatrix, embedder: Embedder) -> None:
        if matrix.ids != keys:
            raise ValueError("matrix ids must equal index keys")
        matrix.require_unique_ids()
        self.keys = keys
        self.matrix = matrix
        self._embedder = embedder
        self._query_cache = EmbeddingCache()

    @classmethod
    def build(cls, keys: tuple[str, ...], embedder: Embedder) -> "DenseDescriptorIndex":
        return cls(keys, embed(embedder, keys), embedder)

    def score_request(self, request: str) -> np.ndarray:
        query = embed(self._embedder, [request], cache=self._query_cache)
        return kernels.dense_scores(self.matrix.rows, query.rows[0].astype(np.float64))


def unique_sorted_keys(descriptor_sets: Iterable[DescriptorSet]) -> tuple[str, ...]:
    return tuple(sorted({ds.key for ds in descriptor_sets}))


def build_index(descriptor_sets: Sequence[DescriptorSet], encoder) -> DescriptorIndex:
    """Build an index over the deduplicated, ascending-sorted keys.

    ``encoder`` is either an index factory (has make_index, e.g. the tf-idf
    encoder, which must fit on the key corpus) or an embedding provider.
    """
    if not descriptor_sets:
        raise ValueError("descriptor_sets must be non-empty")
    keys = unique_sorted_keys(descriptor_sets)
    if hasattr(encoder, "make_index"):
        return encoder.make_index(keys)
    return DenseDescriptorIndex.build(keys, encoder)


def rank(request: str, index: DescriptorIndex, k: int) -> list[tuple[str, float]]:
    """Top-k (key, score) pairs, scores descending, ties by ascending key.

    The tie rule costs nothing extra: keys are stored ascending and the
    sort is stable, so equal scores keep key order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = index.score_request(request)
    top = kernels.top_k_descending(scores, k)
    return [(index.keys[i], float(scores[i])) for i in top]
