"""Layer-gating classifier head over stacked backbone features.

Given an utterance's hidden-state stack ``H`` of shape (L, N, D), the
head scores it with four parameter blocks (all binary64):

1. per-layer summary      a_l = mean over frames of H[l]          (L, D)
2. layer gate             alpha_l = sigmoid(a_l . gate_weight + gate_bias)
3. gated mix              M = sum_l alpha_l * H[l]                (N, D)
4. temporal max pool      m_d = max over frames of M[:, d], ties
                          resolved to the lowest frame index
5. affine score           score = m . out_weight + out_bias

Larger scores mean more bonafide.  The backward pass is exact
reverse-mode differentiation of the same graph; at the max pool the
gradient flows only through each feature's winning frame, matching the
subgradient convention of the forward tie-break.

Checkpoints use the SLSP container: little-endian ``SLSP`` magic,
version u16 = 1, D u32, then gate_weight (D binary64), gate_bias,
out_weight (D binary64), out_bias.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, TextIO

import numpy as np

from .errors import CheckpointError, NumericError, UsageError
from .rng import SplitMix64
from .validation import check_feature_dim, check_seed, check_stack_values

SLSP_MAGIC = b"SLSP"
SLSP_VERSION = 1

_SLSP_FIXED = struct.Struct("<4sHI")


@dataclass
class SlsParams:
    """The head's trainable parameters."""

    gate_weight: np.ndarray
    gate_bias: float
    out_weight: np.ndarray
    out_bias: float

    def __post_init__(self):
        self.gate_weight = np.ascontiguousarray(self.gate_weight, dtype=np.float64)
        self.out_weight = np.ascontiguousarray(self.out_weight, dtype=np.float64)
        self.gate_bias = float(self.gate_bias)
        self.out_bias = float(self.out_bias)
        if self.gate_weight.ndim != 1 or self.out_weight.ndim != 1:
            raise UsageError("weight blocks must be 1-D vectors")
        if self.gate_weight.shape != self.out_weight.shape:
            raise UsageError(
                f"gate_weight and out_weight disagree on D: "
                f"{self.gate_weight.shape[0]} vs {self.out_weight.shape[0]}"
            )
        if self.gate_weight.shape[0] < 1:
            raise UsageError("feature dim must be >= 1")

    @property
    def feature_dim(self) -> int:
        return self.gate_weight.shape[0]

    @property
    def size(self) -> int:
        """Total scalar count: two D-vectors plus two biases."""
        return 2 * self.feature_dim + 2

    def copy(self) -> "SlsParams":
        return SlsParams(
            gate_weight=self.gate_weight.copy(),
            gate_bias=self.gate_bias,
            out_weight=self.out_weight.copy(),
            out_bias=self.out_bias,
        )

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.gate_weight))
            and np.all(np.isfinite(self.out_weight))
            and np.isfinite(self.gate_bias)
            and np.isfinite(self.out_bias)
        )

    def to_vector(self) -> np.ndarray:
        """Flatten as [gate_weight, gate_bias, out_weight, out_bias]."""
        return np.concatenate(
            [self.gate_weight, [self.gate_bias], self.out_weight, [self.out_bias]]
        )

    @classmethod
    def from_vector(cls, feature_dim: int, vector: np.ndarray) -> "SlsParams":
        vector = np.asarray(vector, dtype=np.float64)
        expected = 2 * feature_dim + 2
        if vector.shape != (expected,):
            raise UsageError(
                f"parameter vector must have shape ({expected},), got {vector.shape}"
            )
        d = feature_dim
        return cls(
            gate_weight=vector[:d].copy(),
            gate_bias=float(vector[d]),
            out_weight=vector[d + 1 : 2 * d + 1].copy(),
            out_bias=float(vector[2 * d + 1]),
        )


@dataclass
class SlsCache:
    """Forward intermediates needed by the exact backward pass."""

    values: np.ndarray  # (L, N, D) binary64 input
    layer_means: np.ndarray  # (L, D)
    alpha: np.ndarray  # (L,)
    mixed: np.ndarray  # (N, D)
    argmax_frames: np.ndarray  # (D,) winning frame per feature
    pooled: np.ndarray  # (D,)
    score: float


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # piecewise form: the exp argument is always <= 0, so no overflow
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    expz = np.exp(z[~pos])
    out[~pos] = expz / (1.0 + expz)
    return out


def init_params(feature_dim: int, seed: int) -> SlsParams:
    """Uniform +-1/sqrt(D) weights (gate first, then output), zero biases."""
    if feature_dim < 1:
        raise UsageError(f"feature_dim must be >= 1, got {feature_dim}")
    check_seed(seed)
    rng = SplitMix64(seed)
    half = 1.0 / np.sqrt(feature_dim)
    gate = np.array([rng.uniform_in(-half, half) for _ in range(feature_dim)])
    out = np.array([rng.uniform_in(-half, half) for _ in range(feature_dim)])
    return SlsParams(gate_weight=gate, gate_bias=0.0, out_weight=out, out_bias=0.0)


def _as_values(stack) -> np.ndarray:
    # HiddenStack or any (L, N, D) array-like; compute in binary64
    values = getattr(stack, "values", stack)
    return check_stack_values(values).astype(np.float64, copy=False)


def sls_forward(stack, params: SlsParams) -> tuple[float, SlsCache]:
    """Score one stack; returns the score and the backward cache."""
    values = _as_values(stack)
    check_feature_dim(params.feature_dim, values.shape[2])
    layer_means = values.mean(axis=1)  # (L, D)
    gate_logits = layer_means @ params.gate_weight + params.gate_bias
    alpha = _sigmoid(gate_logits)
    mixed = np.tensordot(alpha, values, axes=(0, 0))  # (N, D)
    argmax_frames = np.argmax(mixed, axis=0)  # first max wins ties
    pooled = mixed[argmax_frames, np.arange(values.shape[2])]
    score = float(pooled @ params.out_weight + params.out_bias)
    cache = SlsCache(
        values=values,
        layer_means=layer_means,
        alpha=alpha,
        mixed=mixed,
        argmax_frames=argmax_frames,
        pooled=pooled,
        score=score,
    )
    return score, cache


def sls_backward(cache: SlsCache, params: SlsParams, upstream: float) -> SlsParams:
    """Exact gradient of ``upstream * score`` w.r.t. every parameter block.

    Returned as an SlsParams whose fields hold the gradients.
    """
    upstream = float(upstream)
    d = cache.values.shape[2]
    d_out_bias = upstream
    d_out_weight = upstream * cache.pooled
    d_pooled = upstream * params.out_weight  # (D,)
    # max pool routes each feature's gradient to its winning frame only;
    # gather H[l, n*_d, d] across layers in one (L, D) slice
    winners = cache.values[:, cache.argmax_frames, np.arange(d)]  # (L, D)
    d_alpha = winners @ d_pooled  # (L,)
    d_gate_logits = d_alpha * cache.alpha * (1.0 - cache.alpha)
    d_gate_weight = cache.layer_means.T @ d_gate_logits
    d_gate_bias = float(d_gate_logits.sum())
    return SlsParams(
        gate_weight=d_gate_weight,
        gate_bias=d_gate_bias,
        out_weight=d_out_weight,
        out_bias=d_out_bias,
    )


def score_stack(stack, params: SlsParams) -> float:
    score, _ = sls_forward(stack, params)
    return score


def layer_weights(stack, params: SlsParams) -> np.ndarray:
    """Per-layer gate activations alpha for one stack, shape (L,)."""
    _, cache = sls_forward(stack, params)
    return cache.alpha


# ---------------------------------------------------------------------------
# SLSP checkpoint I/O


def save_params(params: SlsParams, destination) -> int:
    """Serialize a checkpoint; returns the byte count written."""
    if isinstance(destination, (str, Path)):
        with open(destination, "wb") as sink:
            return save_params(params, sink)
    if not params.is_finite():
        raise NumericError("refusing to save non-finite parameters")
    sink: BinaryIO = destination
    blob = _SLSP_FIXED.pack(SLSP_MAGIC, SLSP_VERSION, params.feature_dim)
    blob += np.ascontiguousarray(params.gate_weight, dtype="<f8").tobytes()
    blob += struct.pack("<d", params.gate_bias)
    blob += np.ascontiguousarray(params.out_weight, dtype="<f8").tobytes()
    blob += struct.pack("<d", params.out_bias)
    sink.write(blob)
    return len(blob)


def load_params(source) -> SlsParams:
    if isinstance(source, (str, Path)):
        with open(source, "rb") as stream:
            try:
                return load_params(stream)
            except CheckpointError as exc:
                raise CheckpointError(f"{source}: {exc}") from None
    stream: BinaryIO = source
    fixed = stream.read(_SLSP_FIXED.size)
    if len(fixed) < 4 or fixed[:4] != SLSP_MAGIC:
        raise CheckpointError(f"not an SLSP checkpoint (magic {fixed[:4]!r})")
    if len(fixed) < _SLSP_FIXED.size:
        raise CheckpointError("truncated header")
    _, version, dim = _SLSP_FIXED.unpack(fixed)
    if version != SLSP_VERSION:
        raise CheckpointError(f"unsupported version {version} (expected {SLSP_VERSION})")
    if dim < 1:
        raise CheckpointError(f"invalid feature dim {dim}")
    body_len = 8 * (2 * dim + 2)
    body = stream.read(body_len)
    if len(body) < body_len:
        raise CheckpointError(f"truncated body: expected {body_len} bytes, got {len(body)}")
    if stream.read(1):
        raise CheckpointError("trailing data after parameters")
    flat = np.frombuffer(body, dtype="<f8")
    params = SlsParams.from_vector(dim, flat)
    if not params.is_finite():
        raise CheckpointError("non-finite parameters")
    return params


def write_layer_weight_csv(destination, rows: Iterable[tuple[str, np.ndarray]]) -> None:
    """CSV of per-utterance gate activations: utterance_id, layer_0, ..."""
    if isinstance(destination, (str, Path)):
        with open(destination, "w", encoding="utf-8", newline="") as stream:
            write_layer_weight_csv(stream, rows)
        return
    stream: TextIO = destination
    header_written = False
    expected_layers = None
    for utterance_id, alpha in rows:
        alpha = np.asarray(alpha, dtype=np.float64)
        if not header_written:
            expected_layers = alpha.shape[0]
            cols = ",".join(f"layer_{i}" for i in range(expected_layers))
            stream.write(f"utterance_id,{cols}\n")
            header_written = True
        elif alpha.shape[0] != expected_layers:
            raise UsageError(
                f"layer count changed mid-report: {alpha.shape[0]} vs {expected_layers} "
                f"(utterance {utterance_id!r})"
            )
        cells = ",".join(f"{value:.17g}" for value in alpha)
        stream.write(f"{utterance_id},{cells}\n")
