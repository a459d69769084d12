"""Dense matrix, label, and index-list file I/O.

Binary matrix format (magic ``SPFM``), all fields little-endian:

====== ======= ==========================================
offset size    field
====== ======= ==========================================
0      4       magic, ASCII ``SPFM``
4      4       version, u32 (currently 1)
8      8       n_rows, u64
16     8       n_cols, u64
24     1       dtype code (1 = float32, 2 = float64)
25     ...     row-major payload
====== ======= ==========================================

CSV matrices are plain comma-separated decimal floats, no quoting. Label and
index files hold one non-negative integer per line. Matrices are float64
in memory regardless of storage dtype, and every loader rejects non-finite
values.
"""

from __future__ import annotations

import math
import struct

import numpy as np

from .errors import (
    ContractError,
    FormatError,
    ParseError,
    TruncationError,
    ValidationError,
)

MAGIC = b"SPFM"
VERSION = 1
DTYPE_F32 = 1
DTYPE_F64 = 2

_HEADER = struct.Struct("<4sIQQB")
HEADER_SIZE = _HEADER.size  # 25 bytes

_STORAGE_CODES = {"f32": DTYPE_F32, "f64": DTYPE_F64}
_CODE_DTYPES = {DTYPE_F32: np.dtype("<f4"), DTYPE_F64: np.dtype("<f8")}


def as_matrix(values) -> np.ndarray:
    """Coerce to a C-ordered float64 2-D array, checking shape and finiteness."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ContractError(f"matrix must be 2-D, got {arr.ndim}-D")
    if arr.size and not np.isfinite(arr).all():
        raise ValidationError("matrix contains non-finite values")
    return arr


def load_matrix_csv(path, has_header: bool = False) -> np.ndarray:
    """Load a comma-separated float matrix, optionally skipping a header row."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    start = 1 if has_header else 0
    rows: list[list[float]] = []
    n_cols: int | None = None
    for lineno, line in enumerate(lines[start:], start=start + 1):
        cells = line.split(",")
        if n_cols is None:
            n_cols = len(cells)
        elif len(cells) != n_cols:
            raise ParseError(
                f"{path}: line {lineno}: expected {n_cols} columns, found {len(cells)}"
            )
        row = []
        for col, cell in enumerate(cells, start=1):
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}, column {col}: not a number: {cell.strip()!r}"
                ) from None
            if not math.isfinite(value):
                raise ValidationError(
                    f"{path}: line {lineno}, column {col}: non-finite value {cell.strip()!r}"
                )
            row.append(value)
        rows.append(row)
    if not rows:
        return np.zeros((0, 0), dtype=np.float64)
    return np.asarray(rows, dtype=np.float64)


def save_matrix_csv(m, path) -> None:
    """Write a matrix as comma-separated floats, one row per line."""
    arr = as_matrix(m)
    with open(path, "w", encoding="utf-8") as fh:
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def save_matrix_bin(m, path, storage: str = "f64") -> None:
    """Write a matrix in the binary format; ``storage`` is ``"f64"`` or ``"f32"``."""
    arr = as_matrix(m)
    code = _STORAGE_CODES.get(storage)
    if code is None:
        raise ContractError(f"unknown storage dtype {storage!r}; expected 'f32' or 'f64'")
    header = _HEADER.pack(MAGIC, VERSION, arr.shape[0], arr.shape[1], code)
    payload = np.ascontiguousarray(arr, dtype=_CODE_DTYPES[code]).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_matrix_bin(path) -> np.ndarray:
    """Load a binary matrix, converting float32 storage to float64."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < HEADER_SIZE:
        raise FormatError(f"{path}: file too short for a header ({len(blob)} bytes)")
    magic, version, n_rows, n_cols, code = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    dtype = _CODE_DTYPES.get(code)
    if dtype is None:
        raise FormatError(f"{path}: unknown dtype code {code}")
    expected = n_rows * n_cols * dtype.itemsize
    payload = blob[HEADER_SIZE:]
    if len(payload) != expected:
        raise TruncationError(
            f"{path}: payload holds {len(payload)} bytes, header promises {expected}"
        )
    values = np.frombuffer(payload, dtype=dtype).astype(np.float64).reshape(n_rows, n_cols)
    if values.size and not np.isfinite(values).all():
        raise ValidationError(f"{path}: matrix contains non-finite values")
    return values


def load_labels(path) -> np.ndarray:
    """Load one non-negative integer per line; an empty file gives an empty vector."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    labels = np.empty(len(lines), dtype=np.int64)
    for i, line in enumerate(lines):
        text = line.strip()
        try:
            value = int(text)
        except ValueError:
            raise ParseError(f"{path}: line {i + 1}: not an integer: {text!r}") from None
        if value < 0:
            raise ParseError(f"{path}: line {i + 1}: negative value {value}")
        labels[i] = value
    return labels


def save_labels(labels, path) -> None:
    arr = np.asarray(labels)
    with open(path, "w", encoding="utf-8") as fh:
        for v in arr:
            fh.write(f"{int(v)}\n")


def load_indices(path) -> np.ndarray:
    """Load a feature-index list; same grammar as label files."""
    return load_labels(path)


def save_indices(indices, path) -> None:
    """Write a feature-index list, one index per line."""
    save_labels(indices, path)
