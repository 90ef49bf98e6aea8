"""Training/eval pair generation from caption corpora.

Captions are split into sentences; each sentence becomes a request that is
paired with up to three sampled variations of the source track's descriptor
set. Variations are drawn first from descriptors that literally appear in
the sentence, then widened with the ones that do not, so a request is seen
with sets of varying size and partial relevance.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import DescriptorSet, Track, make_descriptor_set, normalize_descriptor
from .seeding import derive_seed

# Sentence terminators never split inside these (lowercased trailing words).
_ABBREVIATIONS = frozenset({"e.g.", "i.e.", "vs.", "etc."})
_TERMINATORS = frozenset(".!?")

# Retries per variation slot before declaring distinct subsets exhausted.
_MAX_DRAWS = 16

MAX_VARIATIONS = 3


@dataclass(frozen=True)
class RequestPair:
    """One (request sentence, sampled descriptor set) pair with provenance."""

    request: str
    descriptor_set: DescriptorSet
    track_id: str
    variation_index: int


def split_sentences(caption: str) -> list[str]:
    """Split a caption into trimmed sentences.

    Splits after '.', '!' or '?' followed by whitespace, except when the
    terminator ends an abbreviation from a small fixed list. Whitespace-only
    input yields an empty list; text without terminal punctuation is one
    sentence.
    """
    sentences: list[str] = []
    start = 0
    n = len(caption)
    for i, ch in enumerate(caption):
        if ch not in _TERMINATORS or i + 1 >= n or not caption[i + 1].isspace():
            continue
        j = i
        while j > start and not caption[j - 1].isspace():
            j -= 1
        word = caption[j : i + 1].lower()
        if word in _ABBREVIATIONS:
            continue
        piece = caption[start : i + 1].strip()
        if piece:
            sentences.append(piece)
        start = i + 1
    tail = caption[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def request_sentences(caption: str) -> list[str]:
    """Sentences of a caption with repeats dropped (first occurrence wins).

    Keeps the per-track pair multiplicity bounded: a repeated sentence must
    not collect two batches of variations for the same (track, request).
    """
    seen: set[str] = set()
    out: list[str] = []
    for sentence in split_sentences(caption):
        if sentence not in seen:
            seen.add(sentence)
            out.append(sentence)
    return out


def _phrase_pattern(phrase: str) -> re.Pattern[str]:
    return re.compile(r"(?<!\w)" + re.escape(phrase) + r"(?!\w)")


def partition_by_overlap(
    sentence: str, descriptors: DescriptorSet
) -> tuple[list[str], list[str]]:
    """Split descriptors into (found in sentence, not found in sentence).

    A descriptor counts as found when its normalized form occurs in the
    normalized sentence as a whole phrase, delimited by word boundaries, so
    "pop" does not match inside "popular". Both output lists preserve the
    set's ascending order.
    """
    haystack = normalize_descriptor(sentence)
    overlapping: list[str] = []
    non_overlapping: list[str] = []
    for item in descriptors.items:
        if _phrase_pattern(item).search(haystack):
            overlapping.append(item)
        else:
            non_overlapping.append(item)
    return overlapping, non_overlapping


def _draw_subset(rng, pool: Sequence[str]) -> DescriptorSet:
    size = rng.randint(1, len(pool))
    return make_descriptor_set(rng.sample(list(pool), size))


def sample_variations(
    sentence: str, descriptors: DescriptorSet, rng_seed: int
) -> list[DescriptorSet]:
    """Sample up to three distinct descriptor-set variations for a sentence.

    Slot 1 draws from the overlapping descriptors (whole set when nothing
    overlaps), slot 2 from the overlapping pool widened by a sampled portion
    of the non-overlapping ones, slot 3 from the full set. Each draw picks a
    size uniformly in 1..len(pool) and then a uniform subset of that size.
    Slots that cannot produce a new key within a bounded number of draws are
    dropped, so fewer than three variations come back once the distinct
    subsets of a pool are exhausted.
    """
    rng = random.Random(rng_seed)
    overlapping, non_overlapping = partition_by_overlap(sentence, descriptors)
    items = list(descriptors.items)

    pool_one = overlapping if overlapping else items
    if non_overlapping:
        portion = sorted(rng.sample(non_overlapping, rng.randint(1, len(non_overlapping))))
        pool_two = sorted(set(overlapping) | set(portion))
    else:
        pool_two = pool_one
    pools = [pool_one, pool_two, items]

    variations: list[DescriptorSet] = []
    seen: set[str] = set()
    for pool in pools:
        for _ in range(_MAX_DRAWS):
            candidate = _draw_subset(rng, pool)
            if candidate.key not in seen:
                seen.add(candidate.key)
                variations.append(candidate)
                break
    return variations


def generate_pairs(corpus: Sequence[Track], rng_seed: int) -> list[RequestPair]:
    """Emit RequestPairs for every (track, sentence, variation).

    Output order is (track order, sentence order, variation index) and is a
    pure function of (corpus, rng_seed): per-sentence seeds are derived from
    the root seed, the track id and the sentence index.
    """
    out: list[RequestPair] = []
    for track in corpus:
        descriptor_set = track.descriptor_set()
        for sentence_index, sentence in enumerate(request_sentences(track.caption)):
            seed = derive_seed(rng_seed, track.id, sentence_index)
            for variation_index, variation in enumerate(
                sample_variations(sentence, descriptor_set, seed)
            ):
                out.append(
                    RequestPair(
                        request=sentence,
                        descriptor_set=variation,
                        track_id=track.id,
                        variation_index=variation_index,
                    )
                )
    return out


def pair_to_json(pair: RequestPair) -> str:
    return json.dumps(
        {
            "request": pair.request,
            "descriptors": list(pair.descriptor_set.items),
            "track_id": pair.track_id,
            "variation": pair.variation_index,
        },
        ensure_ascii=False,
    )


def dump_pairs(pairs: Iterable[RequestPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(pair_to_json(pair))
            fh.write("\n")


def load_pairs(path: str | Path) -> list[RequestPair]:
    """Read a pairs JSONL file written by dump_pairs (or produced upstream)."""
    pairs: list[RequestPair] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            pairs.append(
                RequestPair(
                    request=obj["request"],
                    descriptor_set=make_descriptor_set(obj["descriptors"]),
                    track_id=obj["track_id"],
                    variation_index=int(obj["variation"]),
                )
            )
    return pairs
