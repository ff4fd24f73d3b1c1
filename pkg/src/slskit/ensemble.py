"""Two-model score fusion and the score file format.

Score files are UTF-8 TSV, one ``utterance_id TAB score`` row per
trial, floats written at full precision (%.17g round-trips binary64).
Lines starting with ``#`` are ignored.

Fusion takes, per utterance, the score of larger magnitude from the
two systems; the first system wins exact-magnitude ties.  The rationale
is that scores are logits centered near the decision boundary, so the
larger |score| is the more confident vote, whichever direction it
points.  Fusing two files requires them to cover exactly the same id
set; output rows follow the first file's order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TextIO

from .errors import DataError, ScoreFileError, UsageError
from .validation import check_utterance_id


@dataclass(frozen=True)
class ScoreEntry:
    utterance_id: str
    score: float

    def __post_init__(self):
        check_utterance_id(self.utterance_id)
        object.__setattr__(self, "score", float(self.score))
        if not math.isfinite(self.score):
            raise ScoreFileError(
                f"score for {self.utterance_id!r} must be finite, got {self.score!r}"
            )


def fuse_max_abs(score_x: float, score_w: float) -> float:
    """The score of larger magnitude; the first argument wins ties."""
    score_x = float(score_x)
    score_w = float(score_w)
    if not (math.isfinite(score_x) and math.isfinite(score_w)):
        raise UsageError(f"scores must be finite, got {score_x!r} and {score_w!r}")
    return score_x if abs(score_x) >= abs(score_w) else score_w


def read_scores(source) -> list[ScoreEntry]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as stream:
            try:
                return read_scores(stream)
            except ScoreFileError as exc:
                raise ScoreFileError(f"{source}: {exc}") from None
    entries: list[ScoreEntry] = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(source, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise ScoreFileError(
                f"line {lineno}: expected 'utterance_id<TAB>score', got {len(fields)} columns"
            )
        utterance_id, token = fields
        if utterance_id in seen:
            raise ScoreFileError(
                f"line {lineno}: duplicate utterance id {utterance_id!r} "
                f"(first seen on line {seen[utterance_id]})"
            )
        try:
            score = float(token)
        except ValueError:
            raise ScoreFileError(f"line {lineno}: bad score {token!r}") from None
        try:
            entries.append(ScoreEntry(utterance_id=utterance_id, score=score))
        except DataError as exc:
            raise ScoreFileError(f"line {lineno}: {exc}") from None
        seen[utterance_id] = lineno
    return entries


def write_scores(destination, entries: Sequence[ScoreEntry]) -> None:
    if isinstance(destination, (str, Path)):
        with open(destination, "w", encoding="utf-8", newline="") as stream:
            write_scores(stream, entries)
        return
    stream: TextIO = destination
    for entry in entries:
        stream.write(f"{entry.utterance_id}\t{entry.score:.17g}\n")


def _preview(ids: list[str], limit: int = 10) -> str:
    shown = ", ".join(sorted(ids)[:limit])
    extra = len(ids) - limit
    return shown + (f", ... ({extra} more)" if extra > 0 else "")


def fuse_entries(
    entries_x: Sequence[ScoreEntry], entries_w: Sequence[ScoreEntry]
) -> list[ScoreEntry]:
    """Max-abs fusion over matching id sets, in the first sequence's order."""
    by_id_w = {e.utterance_id: e.score for e in entries_w}
    ids_x = [e.utterance_id for e in entries_x]
    only_x = [uid for uid in ids_x if uid not in by_id_w]
    only_w = [uid for uid in by_id_w if uid not in set(ids_x)]
    if only_x or only_w:
        parts = []
        if only_x:
            parts.append(f"{len(only_x)} only in the first file: {_preview(only_x)}")
        if only_w:
            parts.append(f"{len(only_w)} only in the second file: {_preview(only_w)}")
        raise ScoreFileError("score files cover different ids: " + "; ".join(parts))
    return [
        ScoreEntry(e.utterance_id, fuse_max_abs(e.score, by_id_w[e.utterance_id]))
        for e in entries_x
    ]


def fuse_files(path_x, path_w, destination) -> None:
    fused = fuse_entries(read_scores(path_x), read_scores(path_w))
    write_scores(destination, fused)
