"""Batch extraction and the determinism selfcheck."""

from __future__ import annotations

import dataclasses
import logging
from pathlib import Path

import numpy as np

from .audio import read_wav
from .backbones import BackboneSpec, run_backbone
from .errors import BackboneError, UsageError
from .hstk import SUFFIX, check_id, write_stack
from .windowing import TARGET_SAMPLES, derive, fit_window

log = logging.getLogger(__name__)

SKELETON_NAME = "manifest_skeleton.tsv"
SKELETON_HEADER = (
    "# fill in per trial: label (1 bonafide / 0 deepfake), attack tag"
    " (- for bonafide), origin\n"
)


def read_id_list(path) -> list[str]:
    """One utterance id per line; '#' comments and blank lines skipped."""
    ids = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            ids.append(check_id(line))
    if not ids:
        raise UsageError(f"{path}: no utterance ids given")
    if len(set(ids)) != len(ids):
        raise UsageError(f"{path}: duplicate utterance ids")
    return ids


def _check_stack(stack: np.ndarray, expected_layers: int, spec: BackboneSpec, name):
    if stack.shape[0] != expected_layers or stack.shape[2] != spec.feature_dim:
        raise BackboneError(
            f"{name}: backbone produced shape {tuple(stack.shape)}, expected"
            f" L={expected_layers}, D={spec.feature_dim}"
        )


def extract_files(
    ids: list[str],
    audio_dir,
    out_dir,
    spec: BackboneSpec,
    model,
    *,
    seed: int = 0,
    train_crop: bool = False,
    drop_embedding: bool = False,
    manifest_out=None,
) -> list[Path]:
    """Extract ``<audio_dir>/<id>.wav`` for every id, in list order.

    Window seeds derive per file from (seed, position) so a rerun with
    the same id list reproduces every crop; eval-style offset-0 windows
    are the default and ``train_crop`` opts into random crops.
    """
    audio_dir = Path(audio_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    expected_layers = spec.emitted_layers(drop_embedding)
    skeleton = [SKELETON_HEADER]
    written = []
    for index, utterance_id in enumerate(ids):
        wav_path = audio_dir / f"{utterance_id}.wav"
        samples = read_wav(wav_path)
        window = fit_window(samples, TARGET_SAMPLES, derive(seed, index), train_crop)
        stack = run_backbone(model, window)
        if drop_embedding:
            stack = stack[1:]
        _check_stack(stack, expected_layers, spec, wav_path)
        dest = out_dir / f"{utterance_id}{SUFFIX}"
        write_stack(dest, utterance_id, stack)
        skeleton.append(f"{utterance_id}\t?\t-\t?\n")
        written.append(dest)
        log.info("wrote %s (L=%d N=%d D=%d)", dest, *stack.shape)
    manifest_path = Path(manifest_out) if manifest_out else out_dir / SKELETON_NAME
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.writelines(skeleton)
    log.info("wrote %s (%d rows, labels pending)", manifest_path, len(written))
    return written


@dataclasses.dataclass(frozen=True)
class SelfcheckReport:
    layers: int
    frames: int
    feature_dim: int
    max_diff: float

    def render(self) -> str:
        # %g keeps an exact 0 readable and a nonzero diff honest
        return (
            f"layers={self.layers} frames={self.frames}"
            f" dim={self.feature_dim} max_diff={self.max_diff:g}\n"
        )


def _probe_tone() -> np.ndarray:
    t = np.arange(TARGET_SAMPLES, dtype=np.float64) / 16000.0
    return 0.1 * np.sin(2.0 * np.pi * 440.0 * t)


def selfcheck(
    spec: BackboneSpec,
    model,
    *,
    drop_embedding: bool = False,
    expect_layers: int | None = None,
) -> SelfcheckReport:
    """Run a fixed tone through the model twice; any drift is a failure."""
    tone = _probe_tone()
    first = run_backbone(model, tone)
    second = run_backbone(model, tone)
    if drop_embedding:
        first, second = first[1:], second[1:]
    expected = expect_layers if expect_layers is not None else spec.emitted_layers(drop_embedding)
    if first.shape[0] != expected:
        raise BackboneError(
            f"layer count mismatch: expected {expected} hidden-state entries,"
            f" backbone produced {first.shape[0]}"
        )
    if first.shape[2] != spec.feature_dim:
        raise BackboneError(
            f"feature dim mismatch: expected D={spec.feature_dim},"
            f" backbone produced D={first.shape[2]}"
        )
    max_diff = float(np.abs(first.astype(np.float64) - second.astype(np.float64)).max())
    if max_diff != 0.0:
        raise BackboneError(f"nondeterministic output: max abs diff {max_diff:g}")
    return SelfcheckReport(first.shape[0], first.shape[1], first.shape[2], max_diff)
