"""Deterministic seed derivation.

One master seed fans out to named subsystem streams so adding parallelism or
reordering work never perturbs results. The derivation is a plain 64-bit
FNV-1a hash over the master seed, the subsystem name, and an index, which
keeps it reproducible across platforms and trivially portable to other
languages.
"""

from __future__ import annotations

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def mix64(x: int) -> int:
    """Finalizing mixer (splitmix64 finalizer); bijective on 64-bit ints."""
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def derive_seed(master: int, name: str, index: int = 0) -> int:
    """Derive a 64-bit stream seed from (master, subsystem name, index)."""
    h = fnv1a64(name.encode("utf-8"))
    h ^= mix64(master & _MASK64)
    h ^= mix64((index & _MASK64) * 0x9E3779B97F4A7C15 & _MASK64)
    return mix64(h)


def rng_for(master: int, name: str, index: int = 0) -> np.random.Generator:
    """A numpy Generator on the named stream."""
    return np.random.default_rng(derive_seed(master, name, index))
