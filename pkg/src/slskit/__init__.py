"""Singing-voice deepfake detection downstream of frozen SSL backbones.

The package covers everything after feature extraction: a layer-gating
classifier head with exact gradients, its focal-loss AdamW training
recipe, max-magnitude two-system score fusion, EER evaluation with
per-attack and per-origin breakdowns, a portable binary container for
hidden-state stacks, and synthetic fixtures that exercise the whole
pipeline without any pretrained model.
"""

__version__ = "0.1.0"

from .ensemble import ScoreEntry, fuse_entries, fuse_files, fuse_max_abs
from .errors import (
    CheckpointError,
    DataError,
    HstkFormatError,
    ManifestError,
    NumericError,
    ScoreFileError,
    SlskitError,
    UsageError,
)
from .estimator import SlsClassifier
from .evalmetrics import (
    EerResult,
    ScoredTrial,
    breakdown,
    compute_eer,
    eer_from_arrays,
    join_scores,
    render_report,
)
from .featstore import (
    FixtureSpec,
    HiddenStack,
    Manifest,
    StackDirectory,
    TrialRecord,
    read_hstk,
    read_manifest,
    synth_fixture,
    synth_stacks,
    write_hstk,
    write_manifest,
)
from .preprocess import Waveform, crop_offset, fit_to_window
from .slshead import (
    SlsParams,
    init_params,
    layer_weights,
    load_params,
    save_params,
    score_stack,
    sls_backward,
    sls_forward,
)
from .trainer import (
    AdamState,
    EpochStats,
    TrainConfig,
    TrainResult,
    adamw_step,
    cosine_lr,
    focal_loss,
    train,
)

__all__ = [
    "AdamState",
    "CheckpointError",
    "DataError",
    "EerResult",
    "EpochStats",
    "FixtureSpec",
    "HiddenStack",
    "HstkFormatError",
    "Manifest",
    "ManifestError",
    "NumericError",
    "ScoreEntry",
    "ScoreFileError",
    "ScoredTrial",
    "SlsClassifier",
    "SlsParams",
    "SlskitError",
    "StackDirectory",
    "TrainConfig",
    "TrainResult",
    "TrialRecord",
    "UsageError",
    "Waveform",
    "adamw_step",
    "breakdown",
    "compute_eer",
    "cosine_lr",
    "crop_offset",
    "eer_from_arrays",
    "fit_to_window",
    "focal_loss",
    "fuse_entries",
    "fuse_files",
    "fuse_max_abs",
    "init_params",
    "join_scores",
    "layer_weights",
    "load_params",
    "read_hstk",
    "read_manifest",
    "render_report",
    "save_params",
    "score_stack",
    "sls_backward",
    "sls_forward",
    "synth_fixture",
    "synth_stacks",
    "train",
    "write_hstk",
    "write_manifest",
]
