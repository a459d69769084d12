"""Writer/reader for the SPFM binary matrix format.

Layout, all little-endian: bytes 0-3 magic ``SPFM``, 4-7 version (u32, = 1),
8-15 n_rows (u64), 16-23 n_cols (u64), byte 24 dtype code (1 = float32,
2 = float64), then the row-major payload.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"SPFM"
VERSION = 1
_HEADER = struct.Struct("<4sIQQB")
_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


class SpfmFormatError(ValueError):
    pass


def write_matrix(matrix, path) -> None:
    arr = np.ascontiguousarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise SpfmFormatError(f"matrix must be 2-D, got {arr.ndim}-D")
    if arr.size and not np.isfinite(arr).all():
        raise SpfmFormatError("matrix contains non-finite values")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, arr.shape[0], arr.shape[1], 2))
        fh.write(arr.astype("<f8").tobytes())


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise SpfmFormatError(f"{path}: too short for a header")
    magic, version, n_rows, n_cols, code = _HEADER.unpack_from(blob)
    if magic != MAGIC or version != VERSION or code not in _CODES:
        raise SpfmFormatError(f"{path}: bad header")
    dtype = _CODES[code]
    payload = blob[_HEADER.size:]
    if len(payload) != n_rows * n_cols * dtype.itemsize:
        raise SpfmFormatError(f"{path}: payload length mismatch")
    return np.frombuffer(payload, dtype=dtype).astype(np.float64).reshape(n_rows, n_cols)
