"""HSTK container writer (plus a reader used for verification).

Layout, all little-endian: magic ``HSTK``, version u16 = 1, flags
u16 = 0, then L, N, D as u32, a u16 id byte length, the UTF-8 id, and
L*N*D float32 values in C order.  One stack per file, nothing after the
payload.  The consuming toolkit validates the same layout on its side;
this module must stay byte-compatible with it.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError

MAGIC = b"HSTK"
VERSION = 1
SUFFIX = ".hstk"

_HEADER = struct.Struct("<4sHHIIIH")


def check_id(utterance_id: str) -> str:
    if not utterance_id:
        raise FormatError("utterance id must be non-empty")
    if any(ch.isspace() for ch in utterance_id) or "/" in utterance_id or "\\" in utterance_id:
        raise FormatError(f"utterance id contains whitespace or slashes: {utterance_id!r}")
    return utterance_id


def write_stack(dest, utterance_id: str, values: np.ndarray) -> int:
    """Serialize one stack; returns the byte count written."""
    check_id(utterance_id)
    values = np.ascontiguousarray(values, dtype=np.float32)
    if values.ndim != 3 or min(values.shape) < 1:
        raise FormatError(f"stack must be a non-empty 3-D array, got shape {values.shape}")
    if not np.isfinite(values).all():
        raise FormatError(f"stack for {utterance_id!r} contains non-finite values")
    id_bytes = utterance_id.encode("utf-8")
    if len(id_bytes) > 0xFFFF:
        raise FormatError("utterance id exceeds 65535 encoded bytes")
    L, N, D = values.shape
    header = _HEADER.pack(MAGIC, VERSION, 0, L, N, D, len(id_bytes))
    payload = values.tobytes(order="C")
    if hasattr(dest, "write"):
        dest.write(header)
        dest.write(id_bytes)
        dest.write(payload)
    else:
        with open(dest, "wb") as handle:
            handle.write(header)
            handle.write(id_bytes)
            handle.write(payload)
    return len(header) + len(id_bytes) + len(payload)


def read_stack(source) -> tuple[str, np.ndarray]:
    """Parse one stack back; strict about every structural byte."""
    if hasattr(source, "read"):
        blob = source.read()
    elif isinstance(source, (bytes, bytearray)):
        blob = bytes(source)
    else:
        with open(source, "rb") as handle:
            blob = handle.read()
    if len(blob) < _HEADER.size:
        raise FormatError("truncated header")
    magic, version, flags, L, N, D, id_len = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError("not an HSTK file")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if flags != 0:
        raise FormatError(f"unsupported flags {flags:#x}")
    if min(L, N, D) < 1:
        raise FormatError(f"invalid dimensions L={L} N={N} D={D}")
    if id_len == 0:
        raise FormatError("empty utterance id")
    offset = _HEADER.size
    if len(blob) < offset + id_len:
        raise FormatError("truncated utterance id")
    try:
        utterance_id = blob[offset : offset + id_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"invalid utterance id bytes: {exc}") from None
    check_id(utterance_id)
    offset += id_len
    expected = L * N * D * 4
    if len(blob) - offset < expected:
        raise FormatError("truncated payload")
    if len(blob) - offset > expected:
        raise FormatError("trailing data after payload")
    values = np.frombuffer(blob, dtype="<f4", count=L * N * D, offset=offset)
    values = values.reshape(L, N, D)
    if not np.isfinite(values).all():
        raise FormatError("corrupt values (non-finite entries)")
    return utterance_id, values
