"""Pinned, bit-exact pseudo-random primitives for the synthetic generators.

Every random decision in this package flows through the constructions in
this module so that outputs are a pure function of the user-visible seed
and can be reproduced bit-for-bit by an independent implementation. The
exact algorithms (constants, operation order, output mappings) are written
out in docs/PRNG.md; the code here must never drift from that document.

Two constructions are provided:

* ``SplitMix64`` / ``Xoshiro256StarStar``: a sequential stream for draws
  whose count is data-dependent (e.g. sampling Voronoi sites one after
  another). The xoshiro state is seeded from four successive SplitMix64
  outputs.
* ``counter_hash``: a stateless per-counter hash built from chained
  SplitMix64 finalization steps. Used for per-pixel decisions so that
  pixel i's draw never depends on how many draws other pixels consumed,
  which makes parallel generation schedule-independent.

All arithmetic is modulo 2**64. The pure-Python scalar path and the
vectorized numpy path implement the same functions and are cross-checked
in the test suite.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """One SplitMix64 step from state ``x`` (increment, then finalize).

    Returns the output for a SplitMix64 generator whose state was ``x``
    before the step. Chaining ``mix64`` over xored/added words is the
    basis of ``counter_hash``.
    """
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & _MASK64
    return z ^ (z >> 31)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized ``mix64`` over a uint64 array."""
    with np.errstate(over="ignore"):
        z = (x + np.uint64(_GOLDEN)).astype(np.uint64)
        z ^= z >> np.uint64(30)
        z *= np.uint64(_MIX_A)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_MIX_B)
        z ^= z >> np.uint64(31)
    return z


def counter_hash(seed: int, stream: int, counters: np.ndarray) -> np.ndarray:
    """Stateless keyed hash: uint64 word per counter.

    Defined as mix64(mix64(mix64(seed) + stream) + counter), all mod 2**64.
    ``stream`` separates independent purposes drawn at the same counters
    (e.g. stream 0 = flip decision, stream 1 = replacement class).
    """
    base = mix64((mix64(seed & _MASK64) + stream) & _MASK64)
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64_array(c + np.uint64(base))


def to_unit(words: np.ndarray) -> np.ndarray:
    """Map uint64 words to float64 in [0, 1) using the top 53 bits."""
    return (np.asarray(words, dtype=np.uint64) >> np.uint64(11)).astype(
        np.float64
    ) * (2.0 ** -53)


def bounded(words: np.ndarray, n: int) -> np.ndarray:
    """Map uint64 words to integers in [0, n) by modulo reduction.

    The modulo bias (at most n / 2**64) is irrelevant at the scales used
    here and keeps the mapping trivially portable.
    """
    if n < 1:
        raise ValueError("bounded: n must be >= 1")
    return (np.asarray(words, dtype=np.uint64) % np.uint64(n)).astype(np.int64)


class SplitMix64:
    """Sequential SplitMix64 stream (pure-Python, exact mod 2**64)."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX_A) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX_B) & _MASK64
        return z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** stream seeded from four SplitMix64 outputs."""

    def __init__(self, seed: int):
        sm = SplitMix64(seed)
        self._s = [sm.next_u64() for _ in range(4)]

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def next_below(self, n: int) -> int:
        """Integer in [0, n) by modulo reduction of the next output."""
        if n < 1:
            raise ValueError("next_below: n must be >= 1")
        return self.next_u64() % n

    def next_unit(self) -> float:
        """Float in [0, 1) from the top 53 bits of the next output."""
        return (self.next_u64() >> 11) * (2.0 ** -53)
