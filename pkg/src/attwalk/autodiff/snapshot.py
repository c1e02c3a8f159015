"""Tensor snapshot files for checkpoints.

Layout (little-endian): b"ATSN", u32 count, then per tensor
u16 name_len, name (utf-8), u8 ndim, u64[ndim] shape, f64[prod(shape)] data.
"""
from __future__ import annotations

import os
import struct
from typing import Mapping

import numpy as np

from ..errors import InvalidCheckpoint
from .tensor import Tensor

MAGIC = b"ATSN"


def encode_snapshots(tensors: Mapping[str, "Tensor | np.ndarray"]) -> bytes:
    parts = [MAGIC, struct.pack("<I", len(tensors))]
    for name in sorted(tensors):
        arr = tensors[name]
        arr = np.asarray(arr.data if isinstance(arr, Tensor) else arr, dtype="<f8")
        raw = name.encode()
        parts.append(struct.pack("<HB", len(raw), arr.ndim))
        parts.append(raw)
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(parts)


def decode_snapshots(data: bytes) -> dict[str, np.ndarray]:
    if data[:4] != MAGIC:
        raise InvalidCheckpoint("tensor snapshot has a bad magic header")
    (count,) = struct.unpack_from("<I", data, 4)
    off = 8
    out = {}
    try:
        for _ in range(count):
            n, ndim = struct.unpack_from("<HB", data, off)
            off += 3
            name = data[off:off + n].decode()
            off += n
            shape = struct.unpack_from(f"<{ndim}Q", data, off)
            off += 8 * ndim
            size = int(np.prod(shape)) if ndim else 1
            out[name] = np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape).astype(np.float64)
            off += 8 * size
    except (struct.error, ValueError) as exc:
        raise InvalidCheckpoint(f"truncated tensor snapshot: {exc}") from None
    return out


def save_snapshots(path: str | os.PathLike, tensors: Mapping) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_snapshots(tensors))


def load_snapshots(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        return decode_snapshots(fh.read())
