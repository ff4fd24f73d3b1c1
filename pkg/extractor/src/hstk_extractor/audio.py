"""WAV input: decode, fold to mono, resample to 16 kHz."""

from __future__ import annotations

import math
import wave

import numpy as np
from scipy.signal import resample_poly

from .errors import AudioError
from .windowing import SAMPLE_RATE


def read_wav(path) -> np.ndarray:
    """Mono float64 samples at 16 kHz, whatever the file's own layout.

    16-bit PCM only — every corpus this feeds on ships that.  Multi-
    channel input is averaged; other rates go through a polyphase
    resampler, which is deterministic, so repeated extraction stays
    byte-identical.
    """
    try:
        with wave.open(str(path), "rb") as handle:
            width = handle.getsampwidth()
            channels = handle.getnchannels()
            rate = handle.getframerate()
            n_frames = handle.getnframes()
            raw = handle.readframes(n_frames)
    except (wave.Error, EOFError) as exc:
        raise AudioError(f"{path}: cannot decode WAV: {exc}") from None
    except OSError as exc:
        raise AudioError(f"{path}: {exc.strerror or exc}") from None
    if width != 2:
        raise AudioError(f"{path}: only 16-bit PCM WAV is supported, got {8 * width}-bit")
    if channels < 1 or rate < 1:
        raise AudioError(f"{path}: nonsensical WAV header")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if channels > 1:
        samples = samples.reshape(-1, channels).mean(axis=1)
    if samples.size == 0:
        raise AudioError(f"{path}: no audio frames")
    if rate != SAMPLE_RATE:
        g = math.gcd(SAMPLE_RATE, rate)
        samples = resample_poly(samples, SAMPLE_RATE // g, rate // g)
    return np.asarray(samples, dtype=np.float64)
