"""Descriptor-level Recall@10 protocol and corpus statistics.

Three test sets are produced by resampling one descriptor-set variation
per (track, request); each set is evaluated against an index built from
that set's own keys, and the report carries mean and population standard
deviation over the three per-set recalls. Recall is computed at the level
of canonical keys, never songs: several tracks may share a key, and the
key is all the ranker sees.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import Track
from .pairs import RequestPair, request_sentences, sample_variations
from .ranker import build_index, rank
from .seeding import derive_seed
from .tfidf import tokenize

DEFAULT_K = 10
DEFAULT_N_SAMPLES = 3


@dataclass(frozen=True)
class EvalReport:
    per_sample_recall: tuple[float, ...]
    mean: float
    std: float
    k: int
    n_requests: int
    n_unique_keys: int


@dataclass(frozen=True)
class DatasetStats:
    n_requests: int
    n_unique_keys: int
    mean_shared_ratio: float


def recall_at_k(ranked_keys: Sequence[str], truth_key: str, k: int) -> int:
    """1 if the truth key appears in the first min(k, len) ranked keys."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return 1 if truth_key in ranked_keys[:k] else 0


def make_test_samples(
    corpus: Sequence[Track], rng_seed: int, n_samples: int = DEFAULT_N_SAMPLES
) -> list[list[RequestPair]]:
    """Produce n_samples test sets, each resampling one variation per request.

    Every test set pairs each (track, sentence) with exactly one sampled
    descriptor-set variation; the samples differ only through their derived
    seeds, so request counts are identical across sets and the whole
    construction is a pure function of (corpus, rng_seed).
    """
    if not corpus:
        raise ValueError("corpus must be non-empty")
    samples: list[list[RequestPair]] = []
    for sample_index in range(n_samples):
        test_set: list[RequestPair] = []
        for track in corpus:
            descriptor_set = track.descriptor_set()
            for sentence_index, sentence in enumerate(request_sentences(track.caption)):
                variations = sample_variations(
                    sentence,
                    descriptor_set,
                    derive_seed(rng_seed, sample_index, track.id, sentence_index, "vary"),
                )
                pick = random.Random(
                    derive_seed(rng_seed, sample_index, track.id, sentence_index, "pick")
                )
                chosen = pick.randrange(len(variations))
                test_set.append(
                    RequestPair(
                        request=sentence,
                        descriptor_set=variations[chosen],
                        track_id=track.id,
                        variation_index=chosen,
                    )
                )
        samples.append(test_set)
    return samples


def evaluate(encoder, test_sets: Sequence[Sequence[RequestPair]], k: int = DEFAULT_K) -> EvalReport:
    """Run the recall protocol: per set, index its keys and rank every request.

    The candidate pool for each test set is that set's own unique keys
    (per-dataset descriptor universe), so an absent truth key is impossible
    and recall measures ranking quality only.
    """
    per_sample: list[float] = []
    all_keys: set[str] = set()
    n_requests = 0
    for test_set in test_sets:
        index = build_index([pair.descriptor_set for pair in test_set], encoder)
        all_keys.update(index.keys)
        n_requests = len(test_set)
        hits = 0
        for pair in test_set:
            ranked = rank(pair.request, index, k)
            hits += recall_at_k([key for key, _ in ranked], pair.descriptor_set.key, k)
        per_sample.append(hits / len(test_set))
    mean = sum(per_sample) / len(per_sample)
    variance = sum((r - mean) ** 2 for r in per_sample) / len(per_sample)
    return EvalReport(
        per_sample_recall=tuple(per_sample),
        mean=mean,
        std=math.sqrt(variance),
        k=k,
        n_requests=n_requests,
        n_unique_keys=len(all_keys),
    )


def shared_word_ratio(request: str, descriptor_key: str) -> float:
    """Fraction of the descriptor set's words found verbatim in the request."""
    descriptor_words = set(tokenize(descriptor_key))
    if not descriptor_words:
        return 0.0
    request_words = set(tokenize(request))
    return len(descriptor_words & request_words) / len(descriptor_words)


def dataset_stats(pairs: Sequence[RequestPair]) -> DatasetStats:
    """Corpus-level statistics over (request, descriptor set) pairs.

    Requests are counted once per (track, request text); keys once per
    distinct canonical key; the shared-word ratio is averaged over pairs.
    """
    if not pairs:
        raise ValueError("pairs must be non-empty")
    requests = {(pair.track_id, pair.request) for pair in pairs}
    keys = {pair.descriptor_set.key for pair in pairs}
    ratios = [shared_word_ratio(pair.request, pair.descriptor_set.key) for pair in pairs]
    return DatasetStats(
        n_requests=len(requests),
        n_unique_keys=len(keys),
        mean_shared_ratio=sum(ratios) / len(ratios),
    )


def report_to_json(report: EvalReport) -> str:
    return json.dumps(
        {
            "per_sample_recall": list(report.per_sample_recall),
            "mean": report.mean,
            "std": report.std,
            "k": report.k,
            "n_requests": report.n_requests,
            "n_unique_keys": report.n_unique_keys,
        },
        ensure_ascii=False,
    )


def format_report_table(reports: dict[str, EvalReport]) -> str:
    """Aligned text table with recall as percent, one decimal, mean +/- std."""
    name_width = max(len("encoder"), max(len(name) for name in reports))
    lines = [f"{'encoder'.ljust(name_width)}  Recall@k (mean +/- std)"]
    for name, report in reports.items():
        cell = f"{report.mean * 100:.1f} +/- {report.std * 100:.1f}"
        lines.append(f"{name.ljust(name_width)}  {cell}")
    return "\n".join(lines)


def dump_test_samples(samples: Sequence[Sequence[RequestPair]], path: str | Path) -> None:
    """Write all test sets to one JSONL file, tagged with their sample index."""
    with open(path, "w", encoding="utf-8") as fh:
        for sample_index, test_set in enumerate(samples):
            for pair in test_set:
                fh.write(
                    json.dumps(
                        {
                            "sample": sample_index,
                            "request": pair.request,
                            "descriptors": list(pair.descriptor_set.items),
                            "track_id": pair.track_id,
                            "variation": pair.variation_index,
                        },
                        ensure_ascii=False,
                    )
                )
                fh.write("\n")
