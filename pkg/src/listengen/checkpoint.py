"""Checkpoint container: named float64 arrays in a small binary layout.

Layout (all integers little-endian uint32, floats little-endian float64):

    magic   4 bytes  b"LDIF"
    version uint32   currently 1
    count   uint32   number of entries
    entry*  name_len uint32, name utf-8 bytes, rank uint32,
            dims rank*uint32, payload prod(dims) float64

Round-trips are bit-exact: the payload is the raw IEEE754 image of the
array. Both model parameters and optimizer state use this container.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DataError

MAGIC = b"LDIF"
VERSION = 1


def save_arrays(path, arrays: dict):
    """Write named arrays. Insertion order of the dict is preserved."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(arrays)))
        for name, arr in arrays.items():
            # not ascontiguousarray: that would promote rank-0 to shape (1,)
            a = np.asarray(arr, dtype=np.float64)
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", a.ndim))
            f.write(struct.pack(f"<{a.ndim}I", *a.shape))
            f.write(a.astype("<f8", copy=False).tobytes())


def _need(f, n: int, what: str) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise DataError(
            f"truncated checkpoint: wanted {n} bytes for {what} at offset {f.tell() - len(buf)}"
        )
    return buf


def load_arrays(path) -> dict:
    """Read back a dict name -> float64 array, in file order."""
    out = {}
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise DataError(f"not a checkpoint file (magic {magic!r}): {path}")
        version, count = struct.unpack("<II", _need(f, 8, "header"))
        if version != VERSION:
            raise DataError(f"unsupported checkpoint version {version} in {path}")
        for i in range(count):
            (name_len,) = struct.unpack("<I", _need(f, 4, f"entry {i} name length"))
            name = _need(f, name_len, f"entry {i} name").decode("utf-8")
            (rank,) = struct.unpack("<I", _need(f, 4, f"{name} rank"))
            dims = struct.unpack(f"<{rank}I", _need(f, 4 * rank, f"{name} dims"))
            n = int(np.prod(dims, dtype=np.int64)) if rank else 1
            payload = _need(f, 8 * n, f"{name} payload")
            out[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)
        trailing = f.read(1)
        if trailing:
            raise DataError(f"trailing bytes after last entry at offset {f.tell() - 1}")
    return out
