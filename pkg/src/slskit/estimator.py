"""Scikit-learn style estimator over the layer-gating head.

``SlsClassifier`` wraps the full training recipe behind the familiar
``fit`` / ``decision_function`` / ``predict`` surface.  Samples are
whole utterances: each X item is an (L, N, D) hidden-state stack (a
HiddenStack or any array-like of that shape).  Stacks may differ in L
and N between utterances; D must match across the dataset and, at
predict time, the fitted parameters.

Following the usual convention, constructor arguments are stored
verbatim and validated in ``fit``, so ``get_params`` / ``set_params``
and grid-search cloning behave as sklearn expects.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .errors import UsageError
from .featstore import BONAFIDE, DEEPFAKE, InMemoryStacks, Manifest, NO_ATTACK, TrialRecord
from .slshead import layer_weights as head_layer_weights
from .slshead import sls_forward
from .trainer import TrainConfig, train
from .validation import check_stack_values


def _sigmoid_scalar(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return float(e / (1.0 + e))


class SlsClassifier(BaseEstimator, ClassifierMixin):
    """Binary bonafide-vs-deepfake classifier over hidden-state stacks.

    Parameters mirror the training recipe: AdamW with decoupled weight
    decay, binary focal loss, cosine-annealed learning rate, and a
    seed-deterministic epoch shuffle.  ``decision_function`` returns
    the raw score (larger = more bonafide); ``predict`` thresholds it
    at zero.
    """

    def __init__(
        self,
        learning_rate: float = 1e-5,
        weight_decay: float = 1e-9,
        t_max: int = 10,
        eta_min: float = 1e-6,
        batch_size: int = 5,
        epochs: int = 10,
        focal_gamma: float = 2.0,
        focal_alpha: float = 0.25,
        seed: int = 0,
    ):
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.t_max = t_max
        self.eta_min = eta_min
        self.batch_size = batch_size
        self.epochs = epochs
        self.focal_gamma = focal_gamma
        self.focal_alpha = focal_alpha
        self.seed = seed

    # ------------------------------------------------------------------

    def _config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            t_max=self.t_max,
            eta_min=self.eta_min,
            batch_size=self.batch_size,
            epochs=self.epochs,
            focal_gamma=self.focal_gamma,
            focal_alpha=self.focal_alpha,
            seed=self.seed,
        )

    @staticmethod
    def _collect(X, y, prefix: str) -> tuple[Manifest, dict[str, np.ndarray]]:
        y = np.asarray(y)
        if y.ndim != 1 or len(y) != len(X):
            raise UsageError(
                f"y must be 1-D with one label per stack, got {y.shape} for {len(X)} stacks"
            )
        stacks: dict[str, np.ndarray] = {}
        records = []
        for i, (item, label) in enumerate(zip(X, y)):
            label = int(label)
            if label not in (0, 1):
                raise UsageError(f"labels must be 0 or 1, got {label!r} at index {i}")
            values = getattr(item, "values", item)
            uid = getattr(item, "utterance_id", f"{prefix}{i:06d}")
            stacks[uid] = check_stack_values(values, context=uid).astype(np.float64)
            attack = NO_ATTACK if label == BONAFIDE else "unspecified"
            records.append(TrialRecord(uid, label, attack, "dataset"))
        return Manifest(records=tuple(records)), stacks

    def fit(self, X, y, eval_set=None) -> "SlsClassifier":
        """Train on stacks X with labels y (1 = bonafide, 0 = deepfake).

        ``eval_set=(X_dev, y_dev)`` enables per-epoch dev EER tracking
        and best-epoch checkpoint selection; without it the final epoch
        is kept.
        """
        if len(X) == 0:
            raise UsageError("X must contain at least one stack")
        manifest, stacks = self._collect(X, y, prefix="train_")
        dims = {arr.shape[2] for arr in stacks.values()}
        if len(dims) != 1:
            raise UsageError(f"all stacks must share the feature dim, got {sorted(dims)}")
        dev_manifest = None
        dev_source = None
        if eval_set is not None:
            X_dev, y_dev = eval_set
            dev_manifest, dev_stacks = self._collect(X_dev, y_dev, prefix="dev_")
            dev_source = InMemoryStacks(dev_stacks)

        result = train(
            manifest,
            InMemoryStacks(stacks),
            self._config(),
            dev_manifest=dev_manifest,
            dev_features=dev_source,
        )
        self.params_ = result.params
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.feature_dim_ = self.params_.feature_dim
        self.classes_ = np.array([DEEPFAKE, BONAFIDE])
        return self

    # ------------------------------------------------------------------

    def decision_function(self, X) -> np.ndarray:
        """Raw scores, one per stack; larger means more bonafide."""
        check_is_fitted(self, "params_")
        scores = np.empty(len(X))
        for i, item in enumerate(X):
            values = getattr(item, "values", item)
            score, _ = sls_forward(values, self.params_)
            scores[i] = score
        return scores

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= 0.0).astype(np.int64)

    def predict_proba(self, X) -> np.ndarray:
        """Column order follows ``classes_``: P(deepfake), P(bonafide)."""
        scores = self.decision_function(X)
        p_bona = np.array([_sigmoid_scalar(s) for s in scores])
        return np.column_stack([1.0 - p_bona, p_bona])

    def layer_weights(self, X) -> list[np.ndarray]:
        """Per-stack gate activations; a list because L may vary per stack."""
        check_is_fitted(self, "params_")
        out = []
        for item in X:
            values = getattr(item, "values", item)
            out.append(head_layer_weights(values, self.params_))
        return out
