"""Equal error rate computation, slice breakdowns, and report rendering.

Score convention: larger means more bonafide.  At a threshold ``t`` a
trial is accepted as bonafide when ``score >= t``, so

    FAR(t) = fraction of deepfake scores >= t       (false accepts)
    FRR(t) = fraction of bonafide scores <  t       (false rejects)

FAR falls and FRR rises as ``t`` sweeps upward, so their difference is
monotone non-increasing over the candidate thresholds (the sorted
unique scores, fenced by -inf and +inf sentinels).  The EER is read at
the first candidate where ``FAR - FRR <= 0``: exactly zero means the
rates cross on a candidate and the EER is their common value; otherwise
the crossing lies between two candidates and both the rate and the
threshold are linearly interpolated.  The +inf sentinel matters: when
every trial carries one identical score, no finite candidate ever gets
FAR below FRR, and the crossing sits between that score and the fence.

Breakdown slices mirror the evaluation protocol of singing-voice
deepfake benchmarks: per attack (all bonafide trials plus one attack's
deepfakes), per origin (one corpus's own bonafide and deepfake trials),
leave-one-origin-out, and overall.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import DataError, UsageError
from .featstore import Manifest

log = logging.getLogger(__name__)

BREAKDOWN_MODES = ("overall", "per_attack", "per_origin", "exclude_origin")


@dataclass(frozen=True)
class ScoredTrial:
    """One evaluation trial: score joined with its manifest row."""

    utterance_id: str
    score: float
    label: int
    attack_type: str
    origin: str


@dataclass(frozen=True)
class EerResult:
    eer: float
    threshold: float
    n_bonafide: int
    n_spoof: int


def eer_from_arrays(scores, labels) -> EerResult:
    """EER of raw score/label arrays (label 1 = bonafide, 0 = deepfake)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise UsageError(
            f"scores and labels must be matching 1-D arrays, got {scores.shape} and {labels.shape}"
        )
    if not np.all(np.isfinite(scores)):
        raise DataError("scores must be finite")
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must be 0 or 1")
    bona = np.sort(scores[labels == 1])
    spoof = np.sort(scores[labels == 0])
    if bona.size == 0 or spoof.size == 0:
        raise DataError(
            f"need at least one trial of each class, got {bona.size} bonafide "
            f"and {spoof.size} deepfake"
        )

    candidates = np.unique(scores)
    # counts at threshold t: spoof >= t accepted, bonafide < t rejected
    far = (spoof.size - np.searchsorted(spoof, candidates, side="left")) / spoof.size
    frr = np.searchsorted(bona, candidates, side="left") / bona.size
    thresholds = np.concatenate(([-np.inf], candidates, [np.inf]))
    far = np.concatenate(([1.0], far, [0.0]))
    frr = np.concatenate(([0.0], frr, [1.0]))

    diff = far - frr
    k = int(np.argmax(diff <= 0))  # first crossing; diff[0] = 1 so k >= 1
    if diff[k] == 0.0:
        eer = 0.5 * (far[k] + frr[k])
        threshold = thresholds[k]
    else:
        i = k - 1
        t = diff[i] / (diff[i] - diff[k])
        eer = far[i] + t * (far[k] - far[i])
        lo, hi = thresholds[i], thresholds[k]
        if np.isfinite(lo) and np.isfinite(hi):
            threshold = lo + t * (hi - lo)
        else:
            threshold = lo if np.isfinite(lo) else hi
    return EerResult(
        eer=float(eer),
        threshold=float(threshold),
        n_bonafide=int(bona.size),
        n_spoof=int(spoof.size),
    )


def compute_eer(trials: Sequence[ScoredTrial]) -> EerResult:
    scores = np.array([t.score for t in trials], dtype=np.float64)
    labels = np.array([t.label for t in trials], dtype=np.int64)
    return eer_from_arrays(scores, labels)


def join_scores(entries, manifest: Manifest) -> list[ScoredTrial]:
    """Attach manifest metadata to score entries, keeping entry order."""
    trials = []
    for entry in entries:
        record = manifest.get(entry.utterance_id)
        if record is None:
            raise DataError(f"scored id {entry.utterance_id!r} is not in the manifest")
        trials.append(
            ScoredTrial(
                utterance_id=entry.utterance_id,
                score=entry.score,
                label=record.label,
                attack_type=record.attack_type,
                origin=record.origin,
            )
        )
    return trials


def _slice_eer(name: str, subset: list[ScoredTrial]) -> EerResult | None:
    n_bona = sum(1 for t in subset if t.label == 1)
    n_spoof = len(subset) - n_bona
    if n_bona == 0 or n_spoof == 0:
        missing = "bonafide" if n_bona == 0 else "deepfake"
        log.warning("slice %s has no %s trials; omitted", name, missing)
        return None
    return compute_eer(subset)


def breakdown(
    trials: Sequence[ScoredTrial], mode: str, origin: str | None = None
) -> list[tuple[str, EerResult | None]]:
    """Named EER slices; a slice missing one class yields None (and a warning)."""
    if mode not in BREAKDOWN_MODES:
        raise UsageError(f"unknown breakdown mode {mode!r} (choose from {BREAKDOWN_MODES})")
    trials = list(trials)
    if mode == "overall":
        return [("overall", _slice_eer("overall", trials))]
    if mode == "per_attack":
        tags = sorted({t.attack_type for t in trials if t.label == 0})
        out = []
        for tag in tags:
            subset = [t for t in trials if t.label == 1 or t.attack_type == tag]
            out.append((tag, _slice_eer(tag, subset)))
        return out
    if mode == "per_origin":
        out = []
        for tag in sorted({t.origin for t in trials}):
            subset = [t for t in trials if t.origin == tag]
            out.append((tag, _slice_eer(tag, subset)))
        return out
    # exclude_origin
    if origin is None:
        raise UsageError("exclude_origin needs the origin to leave out")
    present = {t.origin for t in trials}
    if origin not in present:
        raise DataError(f"origin {origin!r} not present (have {sorted(present)})")
    name = f"w/o-{origin}"
    subset = [t for t in trials if t.origin != origin]
    return [(name, _slice_eer(name, subset))]


# ---------------------------------------------------------------------------
# report rendering


def render_report(cells: Sequence[tuple[str, float | None]]) -> str:
    """Two-line fixed-format table: slice names, then EER percents.

    Values print as percents with two decimals, single-space separated;
    a missing slice prints as '-'.  The value line's format is a stable
    interface (documentation tables are diffed against it byte for byte).
    """
    if not cells:
        raise UsageError("report needs at least one slice")
    header = "columns: " + " ".join(name for name, _ in cells)
    values = " ".join(
        "-" if eer is None else f"{100.0 * eer:.2f}" for _, eer in cells
    )
    return f"{header}\n{values}\n"


def write_report_csv(
    destination, rows: Iterable[tuple[str, EerResult | None]]
) -> None:
    """Full-precision CSV twin of the rendered report (missing slices skipped)."""
    if isinstance(destination, (str, Path)):
        with open(destination, "w", encoding="utf-8", newline="") as stream:
            write_report_csv(stream, rows)
        return
    stream: TextIO = destination
    stream.write("slice,eer,threshold,n_bonafide,n_spoof\n")
    for name, result in rows:
        if result is None:
            continue
        stream.write(
            f"{name},{result.eer:.17g},{result.threshold:.17g},"
            f"{result.n_bonafide},{result.n_spoof}\n"
        )
