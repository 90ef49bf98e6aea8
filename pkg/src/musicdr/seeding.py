"""Stable seed derivation for reproducible sampling.

Python's builtin hash() is salted per process, so every derived seed here
goes through blake2b instead. Same inputs, same seed, on any platform.
"""

from __future__ import annotations

import hashlib


def derive_seed(*parts: int | str) -> int:
    """Derive a 64-bit seed from a root seed and arbitrary context parts."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        token = f"{type(part).__name__}:{part}"
        h.update(token.encode("utf-8"))
        h.update(b"\x00")
    return int.from_bytes(h.digest(), "little")
