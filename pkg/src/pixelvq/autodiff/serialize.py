"""Tensor payload encoding: u32 rank, u32 dims, then little-endian f32 row-major data."""

from __future__ import annotations

import struct

import numpy as np

from pixelvq.errors import CheckpointFormatError


def tensor_to_bytes(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    header = struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape)
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def tensor_from_bytes(buf: bytes, offset: int = 0) -> tuple:
    """Decode one payload starting at ``offset``; returns ``(array, next_offset)``."""
    try:
        (rank,) = struct.unpack_from("<I", buf, offset)
        offset += 4
        dims = struct.unpack_from(f"<{rank}I", buf, offset)
        offset += 4 * rank
    except struct.error as exc:
        raise CheckpointFormatError(f"truncated tensor header at byte {offset}") from exc
    count = int(np.prod(dims)) if rank else 1
    nbytes = 4 * count
    if offset + nbytes > len(buf):
        raise CheckpointFormatError(f"truncated tensor payload at byte {offset}")
    arr = np.frombuffer(buf, dtype="<f4", count=count, offset=offset).reshape(dims)
    return arr.astype(np.float32), offset + nbytes
