"""Bridge from pretrained speech backbones to HSTK feature files."""

from .backbones import REGISTRY, BackboneSpec, backbone_spec, load_backbone, run_backbone
from .errors import AudioError, BackboneError, ExtractorError, FormatError, UsageError
from .hstk import read_stack, write_stack
from .pipeline import SelfcheckReport, extract_files, read_id_list, selfcheck
from .windowing import SAMPLE_RATE, TARGET_SAMPLES, crop_offset, derive, fit_window

__version__ = "0.1.0"

__all__ = [
    "REGISTRY",
    "BackboneSpec",
    "backbone_spec",
    "load_backbone",
    "run_backbone",
    "ExtractorError",
    "UsageError",
    "AudioError",
    "FormatError",
    "BackboneError",
    "read_stack",
    "write_stack",
    "SelfcheckReport",
    "extract_files",
    "read_id_list",
    "selfcheck",
    "SAMPLE_RATE",
    "TARGET_SAMPLES",
    "crop_offset",
    "derive",
    "fit_window",
    "__version__",
]
