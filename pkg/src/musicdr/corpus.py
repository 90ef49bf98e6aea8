"""Catalog ingestion: tracks, descriptor normalization, canonical keys.

A descriptor set's identity is its canonical key: the normalized descriptor
phrases, deduplicated, sorted ascending, joined with ", ". Everything
downstream (indexing, mining, evaluation) compares sets by that key.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

KEY_SEPARATOR = ", "


class CorpusError(Exception):
    """Base class for corpus loading/validation failures."""


class ParseError(CorpusError):
    def __init__(self, line_no: int, message: str, source: str = "") -> None:
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}line {line_no}: {message}")
        self.line_no = line_no


class DuplicateIdError(CorpusError):
    pass


class EmptyDescriptorsError(CorpusError):
    pass


class AllEmptyError(CorpusError):
    """Every raw descriptor normalized to the empty string."""


class SeparatorInDescriptorError(CorpusError):
    """A normalized descriptor contains the key separator ", ".

    Allowing it would make canonical keys ambiguous (keys could no longer be
    split back into their descriptors), so such input is rejected outright.
    """


def normalize_descriptor(raw: str) -> str:
    """Normalize one raw descriptor phrase.

    Unicode NFC, lowercased, outer whitespace stripped, inner whitespace
    runs collapsed to a single space. May return "" for whitespace-only
    input; callers decide whether that is an error.
    """
    text = unicodedata.normalize("NFC", raw).lower()
    return " ".join(text.split())


@dataclass(frozen=True)
class DescriptorSet:
    """Normalized, deduplicated, ascending-sorted descriptor phrases.

    Equality and hashing go through ``key`` only; two sets with the same
    key are the same set.
    """

    items: tuple[str, ...]
    key: str = field(compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "key", KEY_SEPARATOR.join(self.items))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DescriptorSet):
            return NotImplemented
        return self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __len__(self) -> int:
        return len(self.items)


def make_descriptor_set(raw: Iterable[str]) -> DescriptorSet:
    """Build the canonical DescriptorSet from raw descriptor strings.

    Input order never matters: items are normalized, deduplicated and
    sorted ascending (bytewise over the normalized strings).

    Raises AllEmptyError if nothing survives normalization and
    SeparatorInDescriptorError if a normalized descriptor contains ", ".
    """
    normalized = {normalize_descriptor(r) for r in raw}
    normalized.discard("")
    if not normalized:
        raise AllEmptyError("no descriptor survived normalization")
    for item in normalized:
        if KEY_SEPARATOR in item:
            raise SeparatorInDescriptorError(
                f"descriptor {item!r} contains the reserved separator {KEY_SEPARATOR!r}"
            )
    items = tuple(sorted(normalized))
    return DescriptorSet(items=items, key=KEY_SEPARATOR.join(items))


@dataclass(frozen=True)
class Track:
    """One catalog item: id, caption text, raw descriptor phrases."""

    id: str
    caption: str
    descriptors: tuple[str, ...]

    def descriptor_set(self) -> DescriptorSet:
        return make_descriptor_set(self.descriptors)


def _parse_track(line_no: int, obj: object, source: str = "") -> Track:
    prefix = f"{source}: " if source else ""
    if not isinstance(obj, dict):
        raise ParseError(line_no, "expected a JSON object", source=source)
    for name in ("id", "caption", "descriptors"):
        if name not in obj:
            raise ParseError(line_no, f"missing field {name!r}", source=source)
    track_id = obj["id"]
    caption = obj["caption"]
    descriptors = obj["descriptors"]
    if not isinstance(track_id, str) or not track_id:
        raise ParseError(line_no, "id must be a non-empty string", source=source)
    if not isinstance(caption, str):
        raise ParseError(line_no, "caption must be a string", source=source)
    if not isinstance(descriptors, list) or not all(isinstance(d, str) for d in descriptors):
        raise ParseError(line_no, "descriptors must be a list of strings", source=source)
    if not descriptors:
        raise EmptyDescriptorsError(f"{prefix}line {line_no}: track {track_id!r} has no descriptors")
    return Track(id=track_id, caption=caption, descriptors=tuple(descriptors))


def load_corpus(path: str | Path) -> list[Track]:
    """Load a JSONL corpus: one {"id", "caption", "descriptors"} object per line.

    Line order is preserved. Duplicate ids, unparseable lines and tracks
    whose descriptors all normalize away are load errors.
    """
    tracks: list[Track] = []
    seen: set[str] = set()
    name = str(path)
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"invalid JSON ({exc.msg})", source=name) from exc
            track = _parse_track(line_no, obj, source=name)
            if track.id in seen:
                raise DuplicateIdError(f"{name}: line {line_no}: duplicate track id {track.id!r}")
            seen.add(track.id)
            try:
                track.descriptor_set()
            except AllEmptyError as exc:
                raise EmptyDescriptorsError(
                    f"{name}: line {line_no}: track {track.id!r} has only empty descriptors"
                ) from exc
            tracks.append(track)
    return tracks


def dump_corpus(tracks: Iterable[Track], path: str | Path) -> None:
    """Write tracks back out in the corpus JSONL schema."""
    with open(path, "w", encoding="utf-8") as fh:
        for track in tracks:
            fh.write(track_to_json(track))
            fh.write("\n")


def track_to_json(track: Track) -> str:
    return json.dumps(
        {"id": track.id, "caption": track.caption, "descriptors": list(track.descriptors)},
        ensure_ascii=False,
    )


def iter_unique_keys(tracks: Iterable[Track]) -> Iterator[str]:
    """Yield each distinct canonical key once, in first-seen order."""
    seen: set[str] = set()
    for track in tracks:
        key = track.descriptor_set().key
        if key not in seen:
            seen.add(key)
            yield key
