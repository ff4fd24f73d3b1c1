"""Hidden-stack container format, trial manifests, and synthetic fixtures.

One utterance's backbone features are an ``(L, N, D)`` block: ``L``
layer outputs, ``N`` frames, ``D`` feature dims.  The on-disk container
(suffix ``.hstk``) is little-endian throughout:

    magic   ``HSTK``         4 bytes
    version u16 = 1
    flags   u16 = 0
    L, N, D u32 each
    id_len  u16
    id      UTF-8, id_len bytes
    payload L*N*D IEEE-754 binary32, layer-major then frame-major then
            feature order (C order of an (L, N, D) array)

One stack per file; trailing bytes are rejected.  Values are stored as
binary32; compute code upcasts to binary64 after load.

Manifests are UTF-8 TSV with columns ``utterance_id``, ``label`` (0 =
deepfake, 1 = bonafide), ``attack_type`` ("-" for bonafide rows), and
``origin``.  Lines starting with ``#`` are ignored.

Synthetic fixtures make the full pipeline runnable without any
pretrained model: two classes of stacks whose designated leading
feature dims carry a mean shift of +-separation/2, with unit-variance
uniform noise everywhere (uniform on [-sqrt(3), sqrt(3)) has variance
1, and its bounded support makes the classes literally separable once
the shift exceeds the noise width).  All draws come from the portable
generator in :mod:`slskit.rng`; utterance ``i`` of a fixture uses the
child seed ``derive(seed, i)``.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, TextIO

import numpy as np

from .errors import DataError, HstkFormatError, ManifestError, UsageError
from .rng import SplitMix64, derive
from .validation import check_label, check_seed, check_stack_values, check_utterance_id

HSTK_MAGIC = b"HSTK"
HSTK_VERSION = 1
HSTK_SUFFIX = ".hstk"

_FIXED_HEADER = struct.Struct("<4sHHIIIH")  # magic .. id_len, 22 bytes

BONAFIDE = 1
DEEPFAKE = 0
NO_ATTACK = "-"

_NOISE_HALF_WIDTH = math.sqrt(3.0)  # unit-variance uniform noise


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class HiddenStack:
    """One utterance's (L, N, D) feature block, immutable after construction."""

    utterance_id: str
    values: np.ndarray

    def __post_init__(self):
        check_utterance_id(self.utterance_id)
        arr = check_stack_values(self.values, context=self.utterance_id)
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def layer_count(self) -> int:
        return self.values.shape[0]

    @property
    def frame_count(self) -> int:
        return self.values.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.values.shape[2]

    def as_float64(self) -> np.ndarray:
        """Compute-precision copy of the stored binary32 values."""
        return self.values.astype(np.float64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, HiddenStack):
            return NotImplemented
        return (
            self.utterance_id == other.utterance_id
            and self.values.shape == other.values.shape
            and self.values.tobytes() == other.values.tobytes()
        )

    __hash__ = None


@dataclass(frozen=True)
class TrialRecord:
    """One manifest row: id, class label, attack tag, dataset origin."""

    utterance_id: str
    label: int
    attack_type: str
    origin: str

    def __post_init__(self):
        try:
            check_utterance_id(self.utterance_id)
            check_label(self.label, context=self.utterance_id)
        except DataError as exc:
            raise ManifestError(str(exc)) from None
        for name, value in (("attack_type", self.attack_type), ("origin", self.origin)):
            if not value or any(ch.isspace() for ch in value):
                raise ManifestError(
                    f"{name} must be a non-empty whitespace-free tag, got {value!r} "
                    f"(utterance {self.utterance_id!r})"
                )
        if self.label == BONAFIDE and self.attack_type != NO_ATTACK:
            raise ManifestError(
                f"bonafide row {self.utterance_id!r} must carry attack_type '-', "
                f"got {self.attack_type!r}"
            )
        if self.label == DEEPFAKE and self.attack_type == NO_ATTACK:
            raise ManifestError(
                f"deepfake row {self.utterance_id!r} must carry a real attack tag, not '-'"
            )

    @property
    def is_bonafide(self) -> bool:
        return self.label == BONAFIDE


@dataclass(frozen=True)
class Manifest:
    """Ordered trial records with unique utterance ids."""

    records: tuple[TrialRecord, ...]
    source: str | None = None
    _by_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        by_id: dict[str, TrialRecord] = {}
        for rec in self.records:
            if rec.utterance_id in by_id:
                raise ManifestError(f"duplicate utterance id {rec.utterance_id!r}")
            by_id[rec.utterance_id] = rec
        object.__setattr__(self, "_by_id", by_id)

    def __iter__(self) -> Iterator[TrialRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def get(self, utterance_id: str) -> TrialRecord | None:
        return self._by_id.get(utterance_id)

    @property
    def ids(self) -> list[str]:
        return [rec.utterance_id for rec in self.records]


# ---------------------------------------------------------------------------
# stack container I/O


def write_hstk(stack: HiddenStack, destination) -> int:
    """Serialize one stack; returns the total byte count written."""
    if isinstance(destination, (str, Path)):
        with open(destination, "wb") as sink:
            try:
                return write_hstk(stack, sink)
            except OSError as exc:
                raise OSError(f"failed writing {destination}: {exc}") from exc
    sink: BinaryIO = destination
    id_bytes = stack.utterance_id.encode("utf-8")
    if len(id_bytes) > 0xFFFF:
        raise DataError(f"utterance id too long to serialize ({len(id_bytes)} bytes)")
    header = _FIXED_HEADER.pack(
        HSTK_MAGIC,
        HSTK_VERSION,
        0,
        stack.layer_count,
        stack.frame_count,
        stack.feature_dim,
        len(id_bytes),
    )
    payload = np.ascontiguousarray(stack.values, dtype="<f4").tobytes()
    sink.write(header)
    sink.write(id_bytes)
    sink.write(payload)
    return len(header) + len(id_bytes) + len(payload)


def _read_exact(stream: BinaryIO, count: int, what: str) -> bytes:
    # chunked so a corrupt huge dimension cannot trigger a giant allocation
    buf = bytearray()
    remaining = count
    while remaining > 0:
        chunk = stream.read(min(remaining, 1 << 26))
        if not chunk:
            raise HstkFormatError(
                f"truncated {what}: expected {count} bytes, got {len(buf)}"
            )
        buf += chunk
        remaining -= len(chunk)
    return bytes(buf)


def read_hstk(source) -> HiddenStack:
    """Parse and validate one stack; rejects any stream violating the layout."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as stream:
            try:
                return read_hstk(stream)
            except HstkFormatError as exc:
                raise HstkFormatError(f"{source}: {exc}") from None
    if isinstance(source, (bytes, bytearray)):
        return read_hstk(io.BytesIO(source))
    stream: BinaryIO = source

    magic = stream.read(4)
    if len(magic) < 4 or magic != HSTK_MAGIC:
        raise HstkFormatError(f"not an HSTK file (magic {magic!r})")
    fixed = _read_exact(stream, _FIXED_HEADER.size - 4, "header")
    version, flags, layers, frames, dim, id_len = struct.unpack("<HHIIIH", fixed)
    if version != HSTK_VERSION:
        raise HstkFormatError(f"unsupported version {version} (expected {HSTK_VERSION})")
    if flags != 0:
        raise HstkFormatError(f"unsupported flags 0x{flags:04x}")
    if min(layers, frames, dim) < 1:
        raise HstkFormatError(
            f"invalid dimensions L={layers} N={frames} D={dim} (all must be >= 1)"
        )
    if id_len < 1:
        raise HstkFormatError("empty utterance id")
    id_bytes = _read_exact(stream, id_len, "utterance id")
    try:
        utterance_id = id_bytes.decode("utf-8")
        check_utterance_id(utterance_id)
    except (UnicodeDecodeError, DataError) as exc:
        raise HstkFormatError(f"invalid utterance id: {exc}") from None

    payload = _read_exact(stream, layers * frames * dim * 4, "payload")
    if stream.read(1):
        raise HstkFormatError("trailing data after payload")
    values = np.frombuffer(payload, dtype="<f4").reshape(layers, frames, dim)
    if not np.all(np.isfinite(values)):
        raise HstkFormatError("corrupt values (non-finite entries)")
    return HiddenStack(utterance_id=utterance_id, values=values)


def stack_path(directory, utterance_id: str) -> Path:
    """Canonical file location of one utterance's stack inside a feature dir."""
    check_utterance_id(utterance_id)
    return Path(directory) / f"{utterance_id}{HSTK_SUFFIX}"


class StackDirectory:
    """Feature source backed by a directory of ``<utterance_id>.hstk`` files."""

    def __init__(self, root):
        self.root = Path(root)
        self._cache: dict[str, np.ndarray] = {}

    def load(self, utterance_id: str) -> np.ndarray:
        """Return the (L, N, D) binary64 block for one utterance."""
        cached = self._cache.get(utterance_id)
        if cached is not None:
            return cached
        path = stack_path(self.root, utterance_id)
        if not path.is_file():
            raise DataError(f"missing feature file for {utterance_id!r}: {path}")
        stack = read_hstk(path)
        if stack.utterance_id != utterance_id:
            raise DataError(
                f"feature file {path} holds id {stack.utterance_id!r}, "
                f"expected {utterance_id!r}"
            )
        return stack.as_float64()

    def preload(self, utterance_ids: Iterable[str]) -> None:
        """Eagerly cache a set of utterances (desk-scale training sets)."""
        for utterance_id in utterance_ids:
            if utterance_id not in self._cache:
                self._cache[utterance_id] = self.load(utterance_id)


class InMemoryStacks:
    """Feature source over already-loaded arrays (estimator fit path)."""

    def __init__(self, stacks: dict[str, np.ndarray]):
        self._stacks = {k: np.asarray(v, dtype=np.float64) for k, v in stacks.items()}

    def load(self, utterance_id: str) -> np.ndarray:
        try:
            return self._stacks[utterance_id]
        except KeyError:
            raise DataError(f"missing features for {utterance_id!r}") from None


# ---------------------------------------------------------------------------
# manifest I/O


def read_manifest(source) -> Manifest:
    """Parse a TSV manifest; every malformed line raises a located error."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as stream:
            manifest = read_manifest(stream)
        return Manifest(records=manifest.records, source=str(source))
    stream: TextIO = source

    records: list[TrialRecord] = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ManifestError(
                f"line {lineno}: expected 4 tab-separated columns, got {len(fields)}"
            )
        utterance_id, label_token, attack_type, origin = fields
        if label_token not in ("0", "1"):
            raise ManifestError(
                f"line {lineno}: bad label token {label_token!r} (expected 0 or 1)"
            )
        if utterance_id in seen:
            raise ManifestError(
                f"line {lineno}: duplicate utterance id {utterance_id!r} "
                f"(first seen on line {seen[utterance_id]})"
            )
        try:
            record = TrialRecord(
                utterance_id=utterance_id,
                label=int(label_token),
                attack_type=attack_type,
                origin=origin,
            )
        except ManifestError as exc:
            raise ManifestError(f"line {lineno}: {exc}") from None
        seen[utterance_id] = lineno
        records.append(record)
    return Manifest(records=tuple(records))


def write_manifest(manifest: Manifest, destination) -> None:
    if isinstance(destination, (str, Path)):
        with open(destination, "w", encoding="utf-8", newline="") as stream:
            write_manifest(manifest, stream)
        return
    for rec in manifest:
        destination.write(
            f"{rec.utterance_id}\t{rec.label}\t{rec.attack_type}\t{rec.origin}\n"
        )


# ---------------------------------------------------------------------------
# synthetic fixtures


@dataclass(frozen=True)
class FixtureSpec:
    """Parameters of one synthetic two-class fixture."""

    count_per_class: int
    layers: int = 4
    frames: int = 16
    feature_dim: int = 16
    class_separation: float = 4.0
    seed: int = 0
    signal_dims: int | None = None
    id_prefix: str = "fx"
    attacks: tuple[str, ...] = ("A09", "A10", "A11", "A12", "A13", "A14")
    origins: tuple[str, ...] = ("kising", "m4singer", "acesinger")

    def __post_init__(self):
        if self.count_per_class < 1:
            raise UsageError("count_per_class must be >= 1")
        if min(self.layers, self.frames, self.feature_dim) < 1:
            raise UsageError("layers, frames and feature_dim must all be >= 1")
        if not (math.isfinite(self.class_separation) and self.class_separation >= 0):
            raise UsageError("class_separation must be finite and >= 0")
        check_seed(self.seed)
        if self.signal_dims is not None and not (
            1 <= self.signal_dims <= self.feature_dim
        ):
            raise UsageError("signal_dims must be in [1, feature_dim]")
        if not self.attacks or not self.origins:
            raise UsageError("attacks and origins must be non-empty")

    @property
    def effective_signal_dims(self) -> int:
        if self.signal_dims is not None:
            return self.signal_dims
        return max(1, self.feature_dim // 2)


def _fixture_values(spec: FixtureSpec, index: int, mean_shift: float) -> np.ndarray:
    rng = SplitMix64(derive(spec.seed, index))
    total = spec.layers * spec.frames * spec.feature_dim
    noise = rng.uniform_block(total) * (2.0 * _NOISE_HALF_WIDTH) - _NOISE_HALF_WIDTH
    values = noise.reshape(spec.layers, spec.frames, spec.feature_dim)
    values[:, :, : spec.effective_signal_dims] += mean_shift
    return values.astype(np.float32)


def synth_stacks(spec: FixtureSpec) -> list[tuple[HiddenStack, TrialRecord]]:
    """Generate the fixture in memory: bonafide block first, then deepfakes."""
    half = 0.5 * spec.class_separation
    out: list[tuple[HiddenStack, TrialRecord]] = []
    for i in range(spec.count_per_class):
        utterance_id = f"{spec.id_prefix}_bona_{i:04d}"
        stack = HiddenStack(utterance_id, _fixture_values(spec, i, +half))
        record = TrialRecord(
            utterance_id, BONAFIDE, NO_ATTACK, spec.origins[i % len(spec.origins)]
        )
        out.append((stack, record))
    for i in range(spec.count_per_class):
        utterance_id = f"{spec.id_prefix}_spoof_{i:04d}"
        stack = HiddenStack(
            utterance_id, _fixture_values(spec, spec.count_per_class + i, -half)
        )
        record = TrialRecord(
            utterance_id,
            DEEPFAKE,
            spec.attacks[i % len(spec.attacks)],
            spec.origins[i % len(spec.origins)],
        )
        out.append((stack, record))
    return out


def synth_fixture(spec: FixtureSpec, out_dir) -> Manifest:
    """Write the fixture's stack files under ``out_dir`` and return its manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for stack, record in synth_stacks(spec):
        write_hstk(stack, stack_path(out_dir, stack.utterance_id))
        records.append(record)
    return Manifest(records=tuple(records), source=str(out_dir))
