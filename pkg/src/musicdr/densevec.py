"""Dense embedding acquisition and storage.

Providers are anything with ``info()`` and ``embed(texts)``; this module
ships the deterministic offline mock (a hash-derived token averager) and
the binary on-disk matrix format. The wire client for external providers
lives in musicdr.wire.

The mock is built for reproducibility: token vectors come from SHAKE-256,
and every accumulation step is either element-wise or an exactly rounded
math.fsum, so the same text embeds to the same bits on any platform.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .tfidf import tokenize

MOCK_DIM = 64
MOCK_SEED = 0x5EED

_MAGIC = b"DVEC"
_VERSION = 1


class MatrixFormatError(Exception):
    """Base class for on-disk matrix format problems."""


class BadMagic(MatrixFormatError):
    pass


class TruncatedFile(MatrixFormatError):
    pass


class IdCountMismatch(MatrixFormatError):
    pass


class ProviderUnavailable(Exception):
    """The embedding/scoring provider cannot be reached or refused the call."""


class DimMismatch(Exception):
    """Provider returned vectors of an unexpected shape."""


class NonFiniteValue(Exception):
    """Provider returned NaN or infinity."""


@dataclass(frozen=True)
class ProviderInfo:
    name: str
    dim: int
    normalizes: bool

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ValueError("provider dim must be positive")


class Embedder(Protocol):
    def info(self) -> ProviderInfo: ...

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


@dataclass
class EmbeddingMatrix:
    """Row-major float32 vectors keyed by the text they embed."""

    dim: int
    ids: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self) -> None:
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float32)
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.rows.ndim != 2 or self.rows.shape != (len(self.ids), self.dim):
            raise ValueError(
                f"rows shape {self.rows.shape} does not match {len(self.ids)} ids x dim {self.dim}"
            )
        if not np.all(np.isfinite(self.rows)):
            raise NonFiniteValue("matrix contains non-finite values")

    def require_unique_ids(self) -> None:
        if len(set(self.ids)) != len(self.ids):
            raise IdCountMismatch("matrix ids are not unique")

    def row_for(self, text_id: str) -> np.ndarray:
        return self.rows[self.ids.index(text_id)]


_token_vector_cache: dict[str, np.ndarray] = {}


def _token_vector(token: str) -> np.ndarray:
    """Deterministic 64-dim unit vector for one token."""
    cached = _token_vector_cache.get(token)
    if cached is not None:
        return cached
    shake = hashlib.shake_256()
    shake.update(MOCK_SEED.to_bytes(4, "little"))
    shake.update(token.encode("utf-8"))
    raw = shake.digest(MOCK_DIM * 8)
    vec = np.empty(MOCK_DIM, dtype=np.float64)
    for d in range(MOCK_DIM):
        (word,) = struct.unpack_from("<Q", raw, d * 8)
        vec[d] = (word >> 11) * 2.0**-52 - 1.0
    norm = math.sqrt(math.fsum(float(x) * float(x) for x in vec))
    if norm > 0.0:
        vec /= norm
    vec.setflags(write=False)
    _token_vector_cache[token] = vec
    return vec


def mock_embed(text: str) -> np.ndarray:
    """Deterministic embedding: mean of token vectors, L2-normalized.

    Token order does not matter (averaging commutes here because the sum is
    accumulated element-wise in a fixed order over the sorted token list).
    Texts with no tokens embed to the zero vector.
    """
    tokens = tokenize(text)
    if not tokens:
        return np.zeros(MOCK_DIM, dtype=np.float64)
    acc = np.zeros(MOCK_DIM, dtype=np.float64)
    for token in sorted(tokens):
        acc += _token_vector(token)
    acc /= len(tokens)
    norm = math.sqrt(math.fsum(float(x) * float(x) for x in acc))
    if norm > 0.0:
        acc /= norm
    return acc


class MockEmbedder:
    """Offline embedding provider built on mock_embed."""

    name = "mock"

    def info(self) -> ProviderInfo:
        return ProviderInfo(name=self.name, dim=MOCK_DIM, normalizes=True)

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        return [mock_embed(text).tolist() for text in texts]


class MockScorer:
    """Offline pair scorer: dot product of mock embeddings.

    Stands in for a cross-encoder teacher in tests; scores are exactly
    reproducible (fsum-accumulated dot of deterministic vectors).
    """

    name = "mock-scorer"

    def info(self) -> ProviderInfo:
        return ProviderInfo(name=self.name, dim=MOCK_DIM, normalizes=True)

    def score(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        out = []
        for left, right in pairs:
            products = mock_embed(left) * mock_embed(right)
            out.append(math.fsum(float(x) for x in products))
        return out


class EmbeddingCache:
    """In-memory rows keyed by exact text; transparent to embed()."""

    def __init__(self) -> None:
        self._rows: dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._rows)

    def get(self, text: str) -> np.ndarray | None:
        return self._rows.get(text)

    def put(self, text: str, row: np.ndarray) -> None:
        stored = np.asarray(row, dtype=np.float32).copy()
        stored.setflags(write=False)
        self._rows[text] = stored


def embed(
    provider: Embedder, texts: Sequence[str], cache: EmbeddingCache | None = None
) -> EmbeddingMatrix:
    """Embed texts through a provider, one row per text in input order.

    With a cache, only cache misses reach the provider; results are
    identical either way. Raises DimMismatch when the provider returns the
    wrong width or count and NonFiniteValue on NaN/inf rows.
    """
    if not texts:
        raise ValueError("texts must be non-empty")
    info = provider.info()
    rows = np.empty((len(texts), info.dim), dtype=np.float32)

    pending: list[str] = []
    pending_slots: dict[str, list[int]] = {}
    for slot, text in enumerate(texts):
        cached = cache.get(text) if cache is not None else None
        if cached is not None:
            rows[slot] = cached
            continue
        if text not in pending_slots:
            pending.append(text)
            pending_slots[text] = []
        pending_slots[text].append(slot)

    if pending:
        vectors = provider.embed(pending)
        if len(vectors) != len(pending):
            raise DimMismatch(
                f"provider returned {len(vectors)} vectors for {len(pending)} texts"
            )
        for text, vector in zip(pending, vectors):
            arr = np.asarray(vector, dtype=np.float32)
            if arr.shape != (info.dim,):
                raise DimMismatch(
                    f"provider returned width {arr.shape} but declared dim {info.dim}"
                )
            if not np.all(np.isfinite(arr)):
                raise NonFiniteValue(f"non-finite embedding for text {text!r}")
            for slot in pending_slots[text]:
                rows[slot] = arr
            if cache is not None:
                cache.put(text, arr)

    return EmbeddingMatrix(dim=info.dim, ids=tuple(texts), rows=rows)


def save_matrix(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Write the binary matrix format: DVEC magic, header, ids, float32 rows."""
    if len(matrix.ids) != matrix.rows.shape[0]:
        raise IdCountMismatch("id count does not match row count")
    matrix.require_unique_ids()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, matrix.dim))
        fh.write(struct.pack("<Q", len(matrix.ids)))
        for text_id in matrix.ids:
            encoded = text_id.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
        fh.write(np.ascontiguousarray(matrix.rows, dtype="<f4").tobytes())


def _read_exact(fh, count: int) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise TruncatedFile(f"expected {count} bytes, got {len(data)}")
    return data


def load_matrix(path: str | Path) -> EmbeddingMatrix:
    """Read a matrix written by save_matrix; bit-exact round trip."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise BadMagic(f"bad magic {magic!r}")
        version, dim = struct.unpack("<II", _read_exact(fh, 8))
        if version != _VERSION:
            raise MatrixFormatError(f"unsupported version {version}")
        (count,) = struct.unpack("<Q", _read_exact(fh, 8))
        ids = []
        for _ in range(count):
            (length,) = struct.unpack("<I", _read_exact(fh, 4))
            ids.append(_read_exact(fh, length).decode("utf-8"))
        payload = _read_exact(fh, count * dim * 4)
    rows = np.frombuffer(payload, dtype="<f4").reshape(count, dim).astype(np.float32)
    matrix = EmbeddingMatrix(dim=dim, ids=tuple(ids), rows=rows)
    matrix.require_unique_ids()
    return matrix


def clear_mock_cache() -> None:
    _token_vector_cache.clear()


def unique_texts(texts: Iterable[str]) -> list[str]:
    """Distinct texts in first-seen order."""
    seen: set[str] = set()
    out: list[str] = []
    for text in texts:
        if text not in seen:
            seen.add(text)
            out.append(text)
    return out
