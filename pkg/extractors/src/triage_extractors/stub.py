"""Integer-exact pseudo-encoder for cross-program parity checks.

The stub maps a sentence to a unit vector through pure 64-bit integer
arithmetic, so two independent implementations produce byte-identical
embedding files. Construction, per sentence:

1. Tokenize (whitespace split, edge punctuation stripped).
2. For token ``t`` and dimension ``j``::

       g(t, j) = mix64( fnv1a64(utf8(t)) XOR mix64(seed) XOR (j * GOLDEN mod 2^64) )

   where ``mix64`` is the splitmix64 finalizer and ``GOLDEN`` is
   0x9E3779B97F4A7C15. The low 32 bits of ``g`` are the token's
   contribution to dimension ``j``.
3. Sum the contributions exactly; reduce each sum modulo 2^32 and
   recenter by subtracting 2^31, giving integers in [-2^31, 2^31).
4. Divide by the square root of the exact integer sum of squares. Only
   the final square root and division are floating-point, and both are
   correctly-rounded IEEE-754 operations, so the result is
   implementation-independent. A sentence with no tokens — or one whose
   recentered sums are all zero — encodes as the zero vector.
"""

from __future__ import annotations

import math

from .textrules import tokenize

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


def mix64(x: int) -> int:
    """Splitmix64 finalizer; bijective on 64-bit integers."""
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def stub_encode(sentence: str, dim: int, seed: int) -> list[float]:
    """Encode one sentence as a ``dim``-length unit vector (or zeros)."""
    if dim < 1:
        raise ValueError(f"stub dimension must be >= 1, got {dim}")
    tokens = tokenize(sentence)
    if not tokens:
        return [0.0] * dim
    seed_mix = mix64(seed & _MASK64)
    hashes = [fnv1a64(token.encode("utf-8")) ^ seed_mix for token in tokens]
    recentered: list[int] = []
    for j in range(dim):
        salt = (j * _GOLDEN) & _MASK64
        acc = 0
        for h in hashes:
            acc += mix64(h ^ salt) & 0xFFFFFFFF
        recentered.append((acc & 0xFFFFFFFF) - (1 << 31))
    sum_sq = sum(s * s for s in recentered)
    if sum_sq == 0:
        return [0.0] * dim
    norm = math.sqrt(float(sum_sq))
    return [float(s) / norm for s in recentered]
