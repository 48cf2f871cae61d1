"""Binary parameter checkpoints, magic "P2C1".

Layout: 4-byte magic, then one record per entry:
name (u32 length + UTF-8 bytes), dtype tag (u8: 0=f32, 1=f64, 2=raw bytes),
rank (u8), extents (rank x u64 LE), then raw little-endian values.
Round trips are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError

MAGIC = b"P2C1"

_TAGS = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("u1")}
_RTAGS = {np.dtype(np.float32): 0, np.dtype(np.float64): 1, np.dtype(np.uint8): 2}


def save_entries(path: str | Path, entries: dict[str, np.ndarray]) -> None:
    """Write named arrays in insertion order."""
    blob = bytearray(MAGIC)
    for name, arr in entries.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype not in _RTAGS:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for entry '{name}'")
        nb = name.encode("utf-8")
        blob += struct.pack("<I", len(nb)) + nb
        blob += struct.pack("<BB", _RTAGS[arr.dtype], arr.ndim)
        blob += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        blob += le.tobytes()
    Path(path).write_bytes(bytes(blob))


def load_entries(path: str | Path) -> dict[str, np.ndarray]:
    """Read all entries; a short/invalid file raises without partial results."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"bad magic in {path}")
    out: dict[str, np.ndarray] = {}
    pos = 4

    def need(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(raw):
            raise CheckpointError(f"truncated checkpoint {path}")
        chunk = raw[pos : pos + n]
        pos += n
        return chunk

    while pos < len(raw):
        (name_len,) = struct.unpack("<I", need(4))
        name = need(name_len).decode("utf-8")
        tag, rank = struct.unpack("<BB", need(2))
        if tag not in _TAGS:
            raise CheckpointError(f"unknown dtype tag {tag} for entry '{name}'")
        shape = struct.unpack(f"<{rank}Q", need(8 * rank))
        dtype = _TAGS[tag]
        count = int(np.prod(shape, dtype=np.int64)) if rank else 1
        data = need(count * dtype.itemsize)
        arr = np.frombuffer(data, dtype=dtype).reshape(shape)
        out[name] = arr.astype(arr.dtype.newbyteorder("="), copy=True)
    return out


def pack_text(text: str) -> np.ndarray:
    """Encode a string as a raw-bytes entry."""
    return np.frombuffer(text.encode("utf-8"), dtype=np.uint8).copy()


def unpack_text(arr: np.ndarray) -> str:
    return arr.tobytes().decode("utf-8")


def write_matrix(path: str | Path, matrix: np.ndarray) -> None:
    """Embedding dump: two u64 extents then float32 little-endian values."""
    m = np.ascontiguousarray(matrix, dtype="<f4")
    if m.ndim != 2:
        raise CheckpointError("matrix dump expects a rank-2 array")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", *m.shape))
        fh.write(m.tobytes())


def read_matrix(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise CheckpointError(f"truncated matrix file {path}")
    rows, cols = struct.unpack("<QQ", raw[:16])
    expect = 16 + rows * cols * 4
    if len(raw) != expect:
        raise CheckpointError(f"matrix file {path} has {len(raw)} bytes, expected {expect}")
    return np.frombuffer(raw[16:], dtype="<f4").reshape(rows, cols).astype(np.float32)
