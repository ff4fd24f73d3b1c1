"""Frozen speech backbones as opaque hidden-state producers.

A backbone maps a 4-second window to an L x N x D stack: entry 0 is the
pre-transformer embedding output, entries 1..L-1 the transformer layers
in order.  Both supported models expose 24 transformer layers at
D=1024, so L defaults to 25 (``--drop-embedding`` trims entry 0).

Models run inference-only on a frozen checkpoint; nothing here trains
or fine-tunes.  ``random_init=True`` builds the published architecture
with seeded random weights instead of loading a checkpoint — the
shapes, determinism, and file plumbing are exactly those of a real
checkpoint, which is what the offline test suite exercises.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np

from .errors import BackboneError
from .windowing import TARGET_SAMPLES

log = logging.getLogger(__name__)

# name -> (checkpoint id, hidden-state entries incl. embedding, feature dim)
REGISTRY = {
    "wavlm-large": ("microsoft/wavlm-large", 25, 1024),
    "xlsr-300m": ("facebook/wav2vec2-xls-r-300m", 25, 1024),
}


@dataclasses.dataclass(frozen=True)
class BackboneSpec:
    """What the run expects of the model; violations abort extraction."""

    name: str
    checkpoint_id: str
    layer_count: int
    feature_dim: int
    device: str = "cpu"

    def emitted_layers(self, drop_embedding: bool) -> int:
        return self.layer_count - 1 if drop_embedding else self.layer_count


def backbone_spec(name: str, device: str = "cpu") -> BackboneSpec:
    if name not in REGISTRY:
        known = ", ".join(sorted(REGISTRY))
        raise BackboneError(f"unknown backbone {name!r} (known: {known})")
    checkpoint_id, layers, dim = REGISTRY[name]
    return BackboneSpec(name, checkpoint_id, layers, dim, device)


def _architecture_config(name: str):
    """Published architecture hyper-parameters, no weights involved."""
    if name == "wavlm-large":
        from transformers import WavLMConfig

        return WavLMConfig(
            hidden_size=1024,
            num_hidden_layers=24,
            num_attention_heads=16,
            intermediate_size=4096,
            feat_extract_norm="layer",
            do_stable_layer_norm=True,
            apply_spec_augment=False,
        )
    if name == "xlsr-300m":
        from transformers import Wav2Vec2Config

        return Wav2Vec2Config(
            hidden_size=1024,
            num_hidden_layers=24,
            num_attention_heads=16,
            intermediate_size=4096,
            feat_extract_norm="layer",
            do_stable_layer_norm=True,
            apply_spec_augment=False,
        )
    raise BackboneError(f"no architecture config for {name!r}")


def _model_class(name: str):
    if name == "wavlm-large":
        from transformers import WavLMModel

        return WavLMModel
    from transformers import Wav2Vec2Model

    return Wav2Vec2Model


def load_backbone(spec: BackboneSpec, checkpoint=None, random_init: bool = False):
    """Build the frozen model: checkpoint path, hub id, or seeded random."""
    import torch

    try:
        if random_init:
            torch.manual_seed(0)  # rerun-identical weights
            model = _model_class(spec.name)(_architecture_config(spec.name))
            log.info("built %s with random weights (no checkpoint)", spec.name)
        else:
            source = checkpoint if checkpoint is not None else spec.checkpoint_id
            model = _model_class(spec.name).from_pretrained(source)
            log.info("loaded %s from %s", spec.name, source)
    except BackboneError:
        raise
    except Exception as exc:  # the hub/torch error zoo is wide open
        raise BackboneError(f"cannot load backbone {spec.name!r}: {exc}") from None
    model.eval()
    for parameter in model.parameters():
        parameter.requires_grad_(False)
    return model.to(spec.device)


def run_backbone(model, window: np.ndarray) -> np.ndarray:
    """One forward pass: (target_samples,) float -> (L, N, D) float32."""
    import torch

    window = np.asarray(window, dtype=np.float32)
    if window.ndim != 1 or window.shape[0] != TARGET_SAMPLES:
        raise BackboneError(
            f"backbone input must be {TARGET_SAMPLES} samples, got shape {window.shape}"
        )
    device = next(model.parameters()).device
    batch = torch.from_numpy(window)[None].to(device)
    with torch.no_grad():
        out = model(batch, output_hidden_states=True)
    states = [h[0].to("cpu").numpy() for h in out.hidden_states]
    return np.stack(states).astype(np.float32)
