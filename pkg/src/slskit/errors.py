"""Exception hierarchy shared across the package.

CLI exit codes map onto this hierarchy: ``UsageError`` -> 1,
``DataError`` (and file-format subclasses) -> 2, ``NumericError`` -> 3.
"""


class SlskitError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(SlskitError):
    """Caller passed inconsistent or out-of-range arguments."""


class DataError(SlskitError):
    """Input data violates a documented contract (bad file, bad row, bad id)."""


class HstkFormatError(DataError):
    """A byte stream does not follow the hidden-stack container layout."""


class ManifestError(DataError):
    """A trial manifest row or file violates the manifest contract."""


class ScoreFileError(DataError):
    """A score file row or pairing violates the score-file contract."""


class CheckpointError(DataError):
    """A parameter checkpoint does not follow its container layout."""


class NumericError(SlskitError):
    """A computation produced non-finite values and was aborted."""
