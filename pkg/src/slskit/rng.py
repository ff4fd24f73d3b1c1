"""Portable deterministic random numbers (SplitMix64).

Every stochastic choice in this package (fixture synthesis, window
cropping, parameter init, epoch shuffling) flows through the SplitMix64
generator of Steele, Lea & Flood, never through the platform RNG.  The
algorithm is 64-bit integer arithmetic only, so any language with u64
semantics (or BigInt) reproduces the streams bit-for-bit; companion
tools re-implement it against the reference vectors in the tests.

Stream derivation: ``derive(seed, k)`` maps a user seed plus a stream
index to an independent child seed via ``mix64(seed + GOLDEN * (k + 1))``.
Callers document their stream indices next to their use.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15

_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """SplitMix64 output finalizer: a 64-bit bijective scrambler."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & MASK64
    return x ^ (x >> 31)


def derive(seed: int, index: int) -> int:
    """Child seed for stream ``index`` of ``seed``; O(1) and collision-resistant."""
    if index < 0:
        raise ValueError(f"stream index must be >= 0, got {index}")
    return mix64((seed + GOLDEN * (index + 1)) & MASK64)


class SplitMix64:
    """The SplitMix64 sequence for one seed.

    State advances by the 64-bit golden ratio; outputs are the mixed
    state.  All methods below are defined purely in terms of
    ``next_u64`` so downstream values are portable too.
    """

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN) & MASK64
        return mix64(self._state)

    def uniform(self) -> float:
        """Float in [0, 1) with 53 random mantissa bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform_in(self, low: float, high: float) -> float:
        return low + (high - low) * self.uniform()

    def next_block(self, count: int) -> np.ndarray:
        """``count`` outputs at once, bit-identical to repeated ``next_u64``.

        uint64 arithmetic wraps mod 2**64 exactly like the scalar path,
        so this is a pure speedup for bulk draws (fixture synthesis).
        """
        if count < 0:
            raise ValueError(f"count must be >= 0, got {count}")
        steps = np.arange(1, count + 1, dtype=np.uint64)
        z = np.uint64(self._state) + np.uint64(GOLDEN) * steps
        self._state = (self._state + GOLDEN * count) & MASK64
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def uniform_block(self, count: int) -> np.ndarray:
        """``count`` floats in [0, 1), matching repeated ``uniform``."""
        return (self.next_block(count) >> np.uint64(11)) * 2.0**-53

    def below(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection on the top of the range."""
        if n <= 0:
            raise ValueError(f"bound must be positive, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates, high index down, swap target via below()."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
