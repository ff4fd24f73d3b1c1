"""Error taxonomy, mirrored onto CLI exit codes (see cli.main)."""


class ExtractorError(Exception):
    """Base class for everything raised deliberately by this package."""


class UsageError(ExtractorError):
    """Caller mistake: bad flag combination, empty id list.  Exit 1."""


class AudioError(ExtractorError):
    """Unreadable or unsupported audio input.  Exit 2."""


class FormatError(ExtractorError):
    """Malformed HSTK container.  Exit 2."""


class BackboneError(ExtractorError):
    """Model load failure, shape mismatch, nondeterminism.  Exit 3."""
