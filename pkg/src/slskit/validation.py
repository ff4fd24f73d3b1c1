"""Input validation helpers, sklearn-check style.

Each helper either returns the validated (possibly converted) value or
raises ``UsageError``/``DataError`` with a message naming the offending
field.  Estimators and file readers share these so the same rules hold
at every entry point.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError, UsageError

MAX_SEED = (1 << 64) - 1

_ID_FORBIDDEN = set(" \t\r\n\v\f/\\")


def check_utterance_id(utterance_id: str, *, context: str = "") -> str:
    """Ids must be non-empty and free of whitespace and path separators."""
    where = f" ({context})" if context else ""
    if not isinstance(utterance_id, str) or not utterance_id:
        raise DataError(f"utterance id must be a non-empty string{where}")
    bad = sorted(set(utterance_id) & _ID_FORBIDDEN)
    if bad:
        raise DataError(
            f"utterance id {utterance_id!r} contains forbidden characters "
            f"{bad}{where}"
        )
    return utterance_id


def check_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise UsageError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise UsageError(f"seed must be in [0, 2^64), got {seed}")
    return seed


def check_stack_values(values, *, context: str = "") -> np.ndarray:
    """Validate an (L, N, D) block of layer features; returns an ndarray view."""
    where = f" ({context})" if context else ""
    arr = np.asarray(values)
    if arr.ndim != 3:
        raise DataError(
            f"stack values must have shape (layers, frames, features), "
            f"got {arr.ndim} dims{where}"
        )
    if min(arr.shape) < 1:
        raise DataError(f"stack dimensions must all be >= 1, got {arr.shape}{where}")
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float32)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"stack values contain NaN or Inf{where}")
    return arr


def check_label(label, *, context: str = "") -> int:
    where = f" ({context})" if context else ""
    if label not in (0, 1):
        raise DataError(f"label must be 0 (deepfake) or 1 (bonafide), got {label!r}{where}")
    return int(label)


def check_feature_dim(param_dim: int, stack_dim: int) -> None:
    if param_dim != stack_dim:
        raise UsageError(
            f"feature dim mismatch: parameters expect D={param_dim}, "
            f"stack has D={stack_dim}"
        )
