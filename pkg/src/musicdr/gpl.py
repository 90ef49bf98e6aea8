"""Pseudo-labeled training-data factory: hard negatives + teacher margins.

For each (request, positive key) pair, negatives are the keys the
retrievers rank closest to the request, excluding the positive itself
(by canonical-key equality, so duplicate keys across tracks can never leak
back in as false negatives). Each (request, positive, negative) tuple is
labeled with the teacher margin score(request, positive) minus
score(request, negative), exported raw and unclipped.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .pairs import RequestPair
from .ranker import DescriptorIndex, rank

logger = logging.getLogger(__name__)


class PairScorer(Protocol):
    def score(self, pairs: Sequence[tuple[str, str]]) -> list[float]: ...


@dataclass(frozen=True)
class TrainingTriple:
    request: str
    positive_key: str
    negative_key: str
    margin: float

    def __post_init__(self) -> None:
        if self.positive_key == self.negative_key:
            raise ValueError("negative key equals positive key")
        if not math.isfinite(self.margin):
            raise ValueError("margin must be finite")


def mine_negatives(
    request: str,
    positive_key: str,
    retriever_indexes: Sequence[DescriptorIndex],
    per_retriever_k: int,
    total: int,
) -> list[str]:
    """Mine up to ``total`` distinct negative keys for one request.

    Each retriever contributes its top per_retriever_k keys (positive
    excluded); the per-retriever lists are merged round-robin so that
    either retriever's rank order is preserved, deduplicated first-wins,
    and truncated. Fewer than ``total`` come back when the indexes do not
    hold enough distinct non-positive keys.
    """
    if total < 1:
        raise ValueError("total must be >= 1")
    if not retriever_indexes:
        raise ValueError("at least one retriever index is required")
    per_lists: list[list[str]] = []
    for index in retriever_indexes:
        ranked = rank(request, index, k=per_retriever_k + 1)
        keys = [key for key, _ in ranked if key != positive_key][:per_retriever_k]
        per_lists.append(keys)

    merged: list[str] = []
    seen: set[str] = set()
    for depth in range(max((len(lst) for lst in per_lists), default=0)):
        for lst in per_lists:
            if depth < len(lst) and lst[depth] not in seen:
                seen.add(lst[depth])
                merged.append(lst[depth])
    return merged[:total]


def margin_label(
    request: str, positive_key: str, negative_key: str, scorer: PairScorer
) -> float:
    """Teacher margin: score(request, positive) - score(request, negative)."""
    scores = scorer.score([(request, positive_key), (request, negative_key)])
    return scores[0] - scores[1]


def generate_triples(
    pairs: Sequence[RequestPair],
    retriever_indexes: Sequence[DescriptorIndex],
    scorer: PairScorer,
    negatives_per_pair: int,
    rng_seed: int,
) -> list[TrainingTriple]:
    """Mine and label triples for every pair, in pair order.

    Mining and labeling are fully deterministic given the indexes and
    scorer; rng_seed is part of the run configuration (echoed by the CLI)
    but no random draw is needed here. Pairs that mine zero negatives are
    skipped and counted in a log line.
    """
    if not pairs:
        raise ValueError("pairs must be non-empty")
    del rng_seed
    per_retriever_k = math.ceil(negatives_per_pair / len(retriever_indexes))
    triples: list[TrainingTriple] = []
    skipped = 0
    for pair in pairs:
        positive = pair.descriptor_set.key
        negatives = mine_negatives(
            pair.request, positive, retriever_indexes, per_retriever_k, negatives_per_pair
        )
        if not negatives:
            skipped += 1
            continue
        score_pairs = [(pair.request, positive)] + [(pair.request, neg) for neg in negatives]
        scores = scorer.score(score_pairs)
        positive_score = scores[0]
        for negative, negative_score in zip(negatives, scores[1:]):
            triples.append(
                TrainingTriple(
                    request=pair.request,
                    positive_key=positive,
                    negative_key=negative,
                    margin=positive_score - negative_score,
                )
            )
    if skipped:
        logger.info("skipped %d pairs that mined zero negatives", skipped)
    return triples


def triple_to_json(triple: TrainingTriple) -> str:
    return json.dumps(
        {
            "query": triple.request,
            "pos": triple.positive_key,
            "neg": triple.negative_key,
            "margin": triple.margin,
        },
        ensure_ascii=False,
    )


def dump_triples(triples: Iterable[TrainingTriple], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for triple in triples:
            fh.write(triple_to_json(triple))
            fh.write("\n")


def load_triples(path: str | Path) -> list[TrainingTriple]:
    triples: list[TrainingTriple] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            triples.append(
                TrainingTriple(
                    request=obj["query"],
                    positive_key=obj["pos"],
                    negative_key=obj["neg"],
                    margin=float(obj["margin"]),
                )
            )
    return triples
