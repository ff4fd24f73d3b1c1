"""Fixed-length waveform windowing shared with feature extractors.

Training and scoring consume fixed 4-second windows at 16 kHz (64000
samples).  The rule, applied before any model sees audio:

* longer than the target: one contiguous random crop whose start
  offset is ``SplitMix64(seed).below(length - target + 1)`` (the first
  draw of the stream); in eval mode the offset is pinned to 0 so
  scoring is crop-free and repeatable,
* shorter: tile the clip end to end, truncate to the target,
* equal: unchanged.

Extractors that live in other codebases must reproduce the same crop
offsets; the golden vector table written by :func:`write_golden_offsets`
(``length TAB seed TAB expected_offset``) is the cross-implementation
contract, and re-deriving a fresh epoch's crop goes through
``derive(seed, epoch)`` so successive epochs see different windows
without coordinating state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

import numpy as np

from .errors import DataError, UsageError
from .rng import SplitMix64, derive
from .validation import check_seed

SAMPLE_RATE = 16000
TARGET_SECONDS = 4.0
TARGET_SAMPLES = 64000


@dataclass(frozen=True)
class Waveform:
    """Mono PCM samples in [-1, 1] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise DataError(f"waveform must be a non-empty 1-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DataError("waveform contains non-finite samples")
        peak = float(np.max(np.abs(arr)))
        if peak > 1.0:
            raise DataError(f"waveform exceeds [-1, 1] (peak {peak:.6g})")
        if self.sample_rate != SAMPLE_RATE:
            raise DataError(
                f"sample rate must be {SAMPLE_RATE}, got {self.sample_rate} (resample upstream)"
            )
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size


def crop_offset(length: int, target: int, seed: int) -> int:
    """Start offset of the random crop for a clip longer than the target."""
    if length <= target:
        raise UsageError(f"crop needs length > target, got {length} <= {target}")
    check_seed(seed)
    return SplitMix64(seed).below(length - target + 1)


def epoch_seed(seed: int, epoch: int) -> int:
    """Per-epoch crop seed so repeated passes draw fresh windows."""
    check_seed(seed)
    if epoch < 0:
        raise UsageError(f"epoch must be >= 0, got {epoch}")
    return derive(seed, epoch)


def fit_to_window(
    waveform: Waveform,
    target_samples: int = TARGET_SAMPLES,
    seed: int = 0,
    eval_mode: bool = False,
) -> Waveform:
    """Crop or tile a waveform to exactly ``target_samples`` samples."""
    if target_samples < 1:
        raise UsageError(f"target_samples must be >= 1, got {target_samples}")
    length = len(waveform)
    if length == target_samples:
        return waveform
    if length > target_samples:
        offset = 0 if eval_mode else crop_offset(length, target_samples, seed)
        window = waveform.samples[offset : offset + target_samples]
    else:
        reps = math.ceil(target_samples / length)
        window = np.tile(waveform.samples, reps)[:target_samples]
    return Waveform(samples=window, sample_rate=waveform.sample_rate)


# ---------------------------------------------------------------------------
# golden crop-offset vectors (cross-implementation contract)

GOLDEN_LENGTHS = (64001, 64100, 70000, 100000, 123457, 128000, 1000000)
GOLDEN_SEEDS = (0, 1, 7, 42, 123456789, (1 << 63) + 11)


def golden_offset_rows(
    target: int = TARGET_SAMPLES,
    lengths: tuple[int, ...] = GOLDEN_LENGTHS,
    seeds: tuple[int, ...] = GOLDEN_SEEDS,
) -> list[tuple[int, int, int]]:
    """(length, seed, offset) triples for every length/seed pair."""
    return [
        (length, seed, crop_offset(length, target, seed))
        for length in lengths
        for seed in seeds
    ]


def write_golden_offsets(destination, target: int = TARGET_SAMPLES) -> None:
    """Write the crop-offset contract as commented TSV."""
    if isinstance(destination, (str, Path)):
        with open(destination, "w", encoding="utf-8", newline="") as stream:
            write_golden_offsets(stream, target=target)
        return
    stream: TextIO = destination
    stream.write(f"# crop offsets for target={target} samples\n")
    stream.write("# columns: length seed expected_offset (tab-separated)\n")
    for length, seed, offset in golden_offset_rows(target=target):
        stream.write(f"{length}\t{seed}\t{offset}\n")


def read_golden_offsets(source) -> list[tuple[int, int, int]]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as stream:
            return read_golden_offsets(stream)
    rows = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataError(f"line {lineno}: expected 3 columns, got {len(parts)}")
        try:
            rows.append((int(parts[0]), int(parts[1]), int(parts[2])))
        except ValueError:
            raise DataError(f"line {lineno}: non-integer field in {line!r}") from None
    return rows
