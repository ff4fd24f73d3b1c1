"""Fixed-length input rule: every clip becomes exactly 4 s at 16 kHz.

Shorter clips tile until they fill the window; longer clips crop at a
SplitMix64-derived offset (offset 0 unless training-style random crops
are requested).  The rule is shared with the training-side toolkit that
consumes the emitted features, and the two implementations are pinned
to each other by the golden offset table checked in at
``golden/window_offsets.tsv`` — change either side and that table
catches the drift.

SplitMix64 follows Steele, Lea & Flood; 64-bit integer arithmetic only,
so the streams are portable across languages and word sizes.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import UsageError

SAMPLE_RATE = 16000
TARGET_SAMPLES = 64000  # 4 seconds

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix64(x: int) -> int:
    x &= _MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK64
    return x ^ (x >> 31)


def derive(seed: int, index: int) -> int:
    """Child seed for stream ``index``; one child per input file."""
    if index < 0:
        raise UsageError(f"stream index must be >= 0, got {index}")
    return _mix64((seed + _GOLDEN * (index + 1)) & _MASK64)


class _Stream:
    """Minimal SplitMix64 sequence; only what the window rule needs."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix64(self._state)

    def below(self, n: int) -> int:
        # unbiased via rejection on the top of the 64-bit range
        if n <= 0:
            raise UsageError(f"bound must be positive, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n


def crop_offset(length: int, target: int, seed: int) -> int:
    """Start of the random crop: first draw of the seed's stream."""
    if length <= target:
        raise UsageError(f"crop needs length > target, got {length} <= {target}")
    return _Stream(seed).below(length - target + 1)


def fit_window(
    samples: np.ndarray,
    target_samples: int = TARGET_SAMPLES,
    seed: int = 0,
    train_crop: bool = False,
) -> np.ndarray:
    """Crop or tile a 1-D sample array to exactly ``target_samples``."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise UsageError(f"samples must be 1-D, got shape {samples.shape}")
    if target_samples < 1:
        raise UsageError(f"target_samples must be >= 1, got {target_samples}")
    length = samples.shape[0]
    if length == target_samples:
        return samples
    if length > target_samples:
        offset = crop_offset(length, target_samples, seed) if train_crop else 0
        return samples[offset : offset + target_samples]
    if length == 0:
        raise UsageError("cannot window an empty clip")
    reps = math.ceil(target_samples / length)
    return np.tile(samples, reps)[:target_samples]


def read_golden_offsets(path) -> list[tuple[int, int, int]]:
    """Parse the shared (length, seed, offset) table; '#' lines are comments."""
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            length, seed, offset = line.split("\t")
            rows.append((int(length), int(seed), int(offset)))
    return rows
