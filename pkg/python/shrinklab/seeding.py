"""
Deterministic seed splitting.

Python's built-in ``hash()`` is salted per process, so stream seeds are derived
with 64-bit FNV-1a mixing. A stochastic loop is cut into fixed-size chunks and
chunk ``k`` of stream ``label`` draws from ``child_rng(seed, label, k)``; the
result therefore does not depend on how many workers process the chunks.
"""

from __future__ import annotations

from typing import Union

import numpy as np

_FNV_OFFSET64 = 0xCBF29CE484222325
_FNV_PRIME64 = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

#: Samples per chunk for every chunked Monte-Carlo stream.
CHUNK_SIZE = 4096

Part = Union[int, str, bytes]


def _to_bytes(x: Part) -> bytes:
    if isinstance(x, bytes):
        return x
    if isinstance(x, int):
        return int(x & _MASK64).to_bytes(8, "little", signed=False)
    return str(x).encode("utf-8")


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET64
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME64) & _MASK64
    return h


def mix(base_seed: int, *parts: Part) -> int:
    """Mix a base seed with any number of parts into a 63-bit non-negative int."""
    h = _fnv1a64(_to_bytes(base_seed))
    for p in parts:
        h ^= _fnv1a64(_to_bytes(p))
        h = (h * _FNV_PRIME64) & _MASK64
    return (h ^ (h >> 33)) & 0x7FFFFFFFFFFFFFFF


def child_rng(base_seed: int, *parts: Part) -> np.random.Generator:
    """A numpy Generator deterministically derived from ``base_seed`` and ``parts``."""
    return np.random.default_rng(mix(base_seed, *parts))


def chunk_sizes(total: int, chunk: int = CHUNK_SIZE) -> list[int]:
    """Split ``total`` draws into fixed-size chunks (the last one may be short)."""
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])
