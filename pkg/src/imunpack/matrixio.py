"""IMX1 binary matrix files and CSV text input.

Layout (all little-endian)::

    offset  size  field
    0       4     magic b"IMX1"
    4       1     version (1)
    5       1     dtype: 0 = int32, 1 = int64, 2 = float64
    6       4     rows (uint32)
    10      4     cols (uint32)
    14      ...   row-major payload
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import MatrixFormatError

MAGIC = b"IMX1"
VERSION = 1
HEADER = struct.Struct("<4sBBII")
DTYPES = {0: np.dtype("<i4"), 1: np.dtype("<i8"), 2: np.dtype("<f8")}
DTYPE_NAMES = {"i32": 0, "i64": 1, "f64": 2}
TEXT_SUFFIXES = {".csv", ".txt"}


def _dtype_code(dtype, M: np.ndarray) -> int:
    if dtype is None:
        return 2 if M.dtype.kind == "f" else 1
    if isinstance(dtype, str):
        if dtype not in DTYPE_NAMES:
            raise ValueError(f"unknown dtype {dtype!r}; expected one of {sorted(DTYPE_NAMES)}")
        return DTYPE_NAMES[dtype]
    if dtype not in DTYPES:
        raise ValueError(f"unknown dtype code {dtype!r}")
    return int(dtype)


def to_bytes(M, dtype=None) -> bytes:
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {M.shape}")
    code = _dtype_code(dtype, M)
    target = DTYPES[code]
    if target.kind == "i":
        if M.dtype.kind == "f" and not np.all(M == np.round(M)):
            raise ValueError("float entries cannot be stored with an integer dtype")
        info = np.iinfo(target)
        if M.size and (M.min() < info.min or M.max() > info.max):
            raise OverflowError(f"entries do not fit dtype {target} ({info.min}..{info.max})")
    payload = np.ascontiguousarray(M, dtype=target).tobytes()
    return HEADER.pack(MAGIC, VERSION, code, M.shape[0], M.shape[1]) + payload


def from_bytes(data: bytes) -> np.ndarray:
    if len(data) < HEADER.size:
        raise MatrixFormatError(
            f"truncated header at byte offset {len(data)}: need {HEADER.size} bytes"
        )
    magic, version, code, rows, cols = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MatrixFormatError(f"bad magic at byte offset 0: expected {MAGIC!r}, got {magic!r}")
    if version != VERSION:
        raise MatrixFormatError(f"unsupported version {version} at byte offset 4")
    if code not in DTYPES:
        raise MatrixFormatError(f"unknown dtype code {code} at byte offset 5")
    dt = DTYPES[code]
    need = rows * cols * dt.itemsize
    have = len(data) - HEADER.size
    if have < need:
        raise MatrixFormatError(
            f"truncated payload at byte offset {len(data)}: expected {need} bytes after "
            f"the header, found {have}"
        )
    if have > need:
        raise MatrixFormatError(f"{have - need} trailing bytes at byte offset {HEADER.size + need}")
    arr = np.frombuffer(data, dtype=dt, count=rows * cols, offset=HEADER.size)
    native = np.int64 if dt.kind == "i" else np.float64
    return arr.reshape(rows, cols).astype(native)


def parse_csv(text: str) -> np.ndarray:
    """Comma-separated rows; all-integer input yields int64, else float64."""
    rows = []
    all_int = True
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        row = []
        for colno, cell in enumerate(line.split(","), start=1):
            cell = cell.strip()
            try:
                row.append(int(cell))
                continue
            except ValueError:
                pass
            try:
                row.append(float(cell))
                all_int = False
            except ValueError:
                raise MatrixFormatError(
                    f"non-numeric cell {cell!r} at line {lineno}, column {colno}"
                ) from None
        if rows and len(row) != len(rows[0]):
            raise MatrixFormatError(
                f"line {lineno} has {len(row)} cells, expected {len(rows[0])}"
            )
        rows.append(row)
    if not rows:
        raise MatrixFormatError("CSV input has no rows")
    if all_int:
        return np.array(rows, dtype=object).astype(np.int64)
    arr = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise MatrixFormatError("CSV input has NaN or infinite cells")
    return arr


def format_csv(M) -> str:
    M = np.asarray(M)
    if M.dtype.kind == "f":
        return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in M)
    return "".join(",".join(str(int(v)) for v in row) + "\n" for row in M)


def load_matrix(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() in TEXT_SUFFIXES:
        return parse_csv(path.read_text())
    return from_bytes(path.read_bytes())


def save_matrix(M, path, dtype=None) -> None:
    """Write ``M`` as IMX1 (or CSV when ``path`` ends in .csv/.txt).

    ``dtype`` is ``"i32"``, ``"i64"``, ``"f64"`` or the numeric code; by
    default integers go to int64 and floats to float64.
    """
    path = Path(path)
    if path.suffix.lower() in TEXT_SUFFIXES:
        path.write_text(format_csv(M))
    else:
        path.write_bytes(to_bytes(M, dtype))
