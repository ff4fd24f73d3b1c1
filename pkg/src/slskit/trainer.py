"""Training recipe for the layer-gating head.

One run is: AdamW with decoupled weight decay over the packed parameter
vector, binary focal loss on the raw score, cosine-annealed learning
rate stepped once per epoch, and a deterministic Fisher-Yates shuffle
of the training ids each epoch.  Every stochastic choice derives from
the run seed: parameter init uses stream 0, the shuffle of epoch ``e``
(1-based) uses stream ``e``.

The loss treats the head's score as the bonafide logit.  With
``s_t = score`` for bonafide and ``-score`` for deepfake trials,

    loss = alpha_t * (1 - sigmoid(s_t))**gamma * softplus(-s_t)

where ``alpha_t`` is ``focal_alpha`` for bonafide and ``1 - focal_alpha``
otherwise.  Both the loss and its derivative are evaluated through
softplus/log1p so scores of magnitude several hundred stay finite.

Per-epoch bookkeeping records the learning rate used, the mean sample
loss, and train/dev EER under the end-of-epoch parameters; the kept
checkpoint is the epoch with the lowest dev EER (earliest on ties), or
the final epoch when no dev set is given.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, TextIO

import numpy as np

from .errors import DataError, NumericError, UsageError
from .evalmetrics import eer_from_arrays
from .featstore import Manifest
from .rng import SplitMix64, derive
from .slshead import SlsParams, init_params, sls_backward, sls_forward
from .validation import check_seed


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters of one training run."""

    learning_rate: float = 1e-5
    weight_decay: float = 1e-9
    t_max: int = 10
    eta_min: float = 1e-6
    batch_size: int = 5
    epochs: int = 10
    focal_gamma: float = 2.0
    focal_alpha: float = 0.25
    seed: int = 0

    def validate(self) -> None:
        if not (math.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise UsageError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        if not (math.isfinite(self.eta_min) and self.eta_min >= 0):
            raise UsageError(f"eta_min must be finite and >= 0, got {self.eta_min}")
        if self.learning_rate < self.eta_min:
            raise UsageError(
                f"learning_rate ({self.learning_rate}) must be >= eta_min ({self.eta_min})"
            )
        if not (math.isfinite(self.weight_decay) and self.weight_decay >= 0):
            raise UsageError(f"weight_decay must be finite and >= 0, got {self.weight_decay}")
        if self.t_max < 1:
            raise UsageError(f"t_max must be >= 1, got {self.t_max}")
        if self.batch_size < 1:
            raise UsageError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise UsageError(f"epochs must be >= 1, got {self.epochs}")
        if not (math.isfinite(self.focal_gamma) and self.focal_gamma >= 0):
            raise UsageError(f"focal_gamma must be finite and >= 0, got {self.focal_gamma}")
        if not (math.isfinite(self.focal_alpha) and 0 < self.focal_alpha < 1):
            raise UsageError(f"focal_alpha must lie in (0, 1), got {self.focal_alpha}")
        check_seed(self.seed)


_INT_KEYS = ("t_max", "batch_size", "epochs", "seed")
_FLOAT_KEYS = ("learning_rate", "weight_decay", "eta_min", "focal_gamma", "focal_alpha")
CONFIG_KEYS = _INT_KEYS + _FLOAT_KEYS


def load_config(source, base: TrainConfig | None = None) -> TrainConfig:
    """Apply ``key = value`` lines from a file on top of ``base`` (or defaults).

    Full-line ``#`` comments and blank lines are skipped; unknown keys
    and repeated keys are errors so typos cannot silently train with
    defaults.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as stream:
            try:
                return load_config(stream, base=base)
            except DataError as exc:
                raise DataError(f"{source}: {exc}") from None
    config = base if base is not None else TrainConfig()
    seen: set[str] = set()
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, token = line.partition("=")
        key = key.strip()
        token = token.strip()
        if key not in CONFIG_KEYS:
            raise DataError(f"line {lineno}: unknown config key {key!r}")
        if key in seen:
            raise DataError(f"line {lineno}: repeated config key {key!r}")
        seen.add(key)
        try:
            value = int(token) if key in _INT_KEYS else float(token)
        except ValueError:
            kind = "integer" if key in _INT_KEYS else "number"
            raise DataError(f"line {lineno}: {key} needs an {kind}, got {token!r}") from None
        config = replace(config, **{key: value})
    return config


# ---------------------------------------------------------------------------
# loss


def focal_loss(score: float, label: int, gamma: float, alpha: float) -> tuple[float, float]:
    """Binary focal loss and its derivative w.r.t. the score.

    Stable for scores of large magnitude: the log term is softplus via
    log1p(exp(-|x|)) and the modulating factor stays in [0, 1].
    """
    if label not in (0, 1):
        raise UsageError(f"label must be 0 or 1, got {label!r}")
    score = float(score)
    if not math.isfinite(score):
        raise NumericError(f"non-finite score {score!r} reached the loss")
    sign = 1.0 if label == 1 else -1.0
    s_t = sign * score
    alpha_t = alpha if label == 1 else 1.0 - alpha
    if s_t >= 0:
        p_t = 1.0 / (1.0 + math.exp(-s_t))
    else:
        e = math.exp(s_t)
        p_t = e / (1.0 + e)
    miss = 1.0 - p_t  # sigmoid(-s_t), the modulating base
    log_term = math.log1p(math.exp(-abs(s_t))) + max(-s_t, 0.0)
    weight = alpha_t * miss**gamma
    loss = weight * log_term
    d_s_t = -alpha_t * miss**gamma * (gamma * p_t * log_term + miss)
    return loss, sign * d_s_t


# ---------------------------------------------------------------------------
# optimizer and schedule


@dataclass
class AdamState:
    """First/second moment estimates and the step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, size: int) -> "AdamState":
        return cls(m=np.zeros(size), v=np.zeros(size))


def adamw_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    learning_rate: float,
    weight_decay: float,
) -> tuple[np.ndarray, AdamState]:
    """One AdamW update; weight decay is decoupled from the moment path."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise UsageError(f"shape mismatch: params {params.shape}, grads {grads.shape}")
    if not np.all(np.isfinite(grads)):
        raise NumericError("non-finite gradient; step aborted")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = (
        params
        - learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
        - learning_rate * weight_decay * params
    )
    new_state = AdamState(
        m=m, v=v, t=t, beta1=state.beta1, beta2=state.beta2, eps=state.eps
    )
    return new_params, new_state


def cosine_lr(step: int, config: TrainConfig) -> float:
    """Cosine annealing from learning_rate down to eta_min over t_max steps.

    The phase is ``step mod t_max`` except that a positive multiple of
    t_max maps to the cycle's endpoint, so step 0 yields learning_rate
    and step t_max yields eta_min exactly.
    """
    if step < 0:
        raise UsageError(f"step must be >= 0, got {step}")
    phase = step % config.t_max
    if step > 0 and phase == 0:
        phase = config.t_max
    span = config.learning_rate - config.eta_min
    return config.eta_min + span * (1.0 + math.cos(math.pi * phase / config.t_max)) / 2.0


# ---------------------------------------------------------------------------
# training loop


@dataclass(frozen=True)
class EpochStats:
    """One history row; epoch is 1-based."""

    epoch: int
    lr: float
    mean_loss: float
    train_eer: float
    dev_eer: float | None


@dataclass
class TrainResult:
    params: SlsParams  # the kept checkpoint
    history: list[EpochStats]
    best_epoch: int


def _score_set(
    manifest: Manifest, stacks: dict[str, np.ndarray], params: SlsParams
) -> tuple[np.ndarray, np.ndarray]:
    scores = np.empty(len(manifest))
    labels = np.empty(len(manifest), dtype=np.int64)
    for i, record in enumerate(manifest):
        score, _ = sls_forward(stacks[record.utterance_id], params)
        scores[i] = score
        labels[i] = record.label
    return scores, labels


def train(
    train_manifest: Manifest,
    features,
    config: TrainConfig,
    dev_manifest: Manifest | None = None,
    dev_features=None,
    progress: Callable[[EpochStats], None] | None = None,
) -> TrainResult:
    """Run the full recipe; every output is a pure function of the inputs."""
    config.validate()
    if len(train_manifest) == 0:
        raise DataError("training manifest is empty")
    labels = {r.label for r in train_manifest}
    if labels != {0, 1}:
        raise DataError("training manifest needs both bonafide and deepfake trials")
    if dev_manifest is not None and dev_features is None:
        dev_features = features

    # load everything up front so a missing file aborts before any work
    train_ids = train_manifest.ids
    cache = {uid: features.load(uid) for uid in train_ids}
    dev_cache: dict[str, np.ndarray] = {}
    if dev_manifest is not None:
        dev_cache = {uid: dev_features.load(uid) for uid in dev_manifest.ids}

    feature_dim = cache[train_ids[0]].shape[2]
    params = init_params(feature_dim, derive(config.seed, 0))
    vector = params.to_vector()
    opt_state = AdamState.fresh(vector.size)
    label_by_id = {r.utterance_id: r.label for r in train_manifest}

    history: list[EpochStats] = []
    best_epoch = 0
    best_dev = math.inf
    best_params = None

    for epoch in range(1, config.epochs + 1):
        lr = cosine_lr(epoch - 1, config)
        order = list(train_ids)
        SplitMix64(derive(config.seed, epoch)).shuffle(order)

        loss_total = 0.0
        params = SlsParams.from_vector(feature_dim, vector)
        for batch_index, start in enumerate(range(0, len(order), config.batch_size), start=1):
            batch = order[start : start + config.batch_size]
            try:
                grad_sum = np.zeros_like(vector)
                batch_loss = 0.0
                for uid in batch:
                    score, fwd = sls_forward(cache[uid], params)
                    loss, d_score = focal_loss(
                        score, label_by_id[uid], config.focal_gamma, config.focal_alpha
                    )
                    grad_sum += sls_backward(fwd, params, d_score).to_vector()
                    batch_loss += loss
                if not math.isfinite(batch_loss):
                    raise NumericError("non-finite loss")
                vector, opt_state = adamw_step(
                    vector, grad_sum / len(batch), opt_state, lr, config.weight_decay
                )
            except NumericError as exc:
                raise NumericError(f"{exc} (epoch {epoch}, batch {batch_index})") from None
            loss_total += batch_loss
            params = SlsParams.from_vector(feature_dim, vector)

        train_scores, train_labels = _score_set(train_manifest, cache, params)
        train_eer = eer_from_arrays(train_scores, train_labels).eer
        dev_eer = None
        if dev_manifest is not None:
            dev_scores, dev_labels = _score_set(dev_manifest, dev_cache, params)
            dev_eer = eer_from_arrays(dev_scores, dev_labels).eer
            if dev_eer < best_dev:
                best_dev = dev_eer
                best_epoch = epoch
                best_params = params.copy()

        stats = EpochStats(
            epoch=epoch,
            lr=lr,
            mean_loss=loss_total / len(order),
            train_eer=train_eer,
            dev_eer=dev_eer,
        )
        history.append(stats)
        if progress is not None:
            progress(stats)

    if best_params is None:  # no dev set: keep the final epoch
        best_params = params.copy()
        best_epoch = config.epochs
    return TrainResult(params=best_params, history=history, best_epoch=best_epoch)


def write_history_csv(destination, history: list[EpochStats]) -> None:
    """CSV twin of the per-epoch log; floats at full precision."""
    if isinstance(destination, (str, Path)):
        with open(destination, "w", encoding="utf-8", newline="") as stream:
            write_history_csv(stream, history)
        return
    stream: TextIO = destination
    stream.write("epoch,lr,mean_loss,train_eer,dev_eer\n")
    for row in history:
        dev = "" if row.dev_eer is None else f"{row.dev_eer:.17g}"
        stream.write(
            f"{row.epoch},{row.lr:.17g},{row.mean_loss:.17g},{row.train_eer:.17g},{dev}\n"
        )
