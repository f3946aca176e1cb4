"""Tensor file formats: a dense little-endian binary container and long CSV.

Binary container
----------------
A 12-byte magic (``TENREC3DNS\\x00\\x01`` for float64 payloads,
``TENREC3MSK\\x00\\x01`` for boolean masks stored as uint8), three
little-endian uint64 dimensions ``n1 n2 n3``, then the payload in Fortran
order (first index fastest).  Files are byte-identical across platforms.

Long CSV
--------
Header ``location,time,day,value`` with 0-based integer indices.  A missing
entry is either an absent row or a row whose value is NaN/empty; on ingest
both become mask=False with value 0.  Duplicate coordinates are an error.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import pandas as pd

from .tensor3 import as_mask, as_tensor3

__all__ = [
    "MAGIC_DENSE",
    "MAGIC_MASK",
    "write_dense",
    "read_dense",
    "write_mask",
    "read_mask",
    "write_long_csv",
    "read_long_csv",
    "write_tensor",
    "read_tensor",
]

MAGIC_DENSE = b"TENREC3DNS\x00\x01"
MAGIC_MASK = b"TENREC3MSK\x00\x01"
_HEADER = struct.Struct("<QQQ")

LONG_CSV_COLUMNS = ("location", "time", "day", "value")


def write_dense(path, t: np.ndarray) -> None:
    """Write a float64 tensor to the binary container."""
    t = as_tensor3(t, "tensor")
    _write_container(path, MAGIC_DENSE, t.shape, t.astype("<f8").ravel(order="F").tobytes())


def read_dense(path) -> np.ndarray:
    """Read a float64 tensor from the binary container."""
    dims, payload = _read_container(path, MAGIC_DENSE, 8)
    flat = np.frombuffer(payload, dtype="<f8")
    return np.reshape(flat, dims, order="F").astype(np.float64)


def write_mask(path, mask: np.ndarray) -> None:
    """Write a boolean mask to the binary container (uint8 payload)."""
    mask = as_mask(mask)
    _write_container(path, MAGIC_MASK, mask.shape, mask.astype(np.uint8).ravel(order="F").tobytes())


def read_mask(path) -> np.ndarray:
    """Read a boolean mask from the binary container."""
    dims, payload = _read_container(path, MAGIC_MASK, 1)
    flat = np.frombuffer(payload, dtype=np.uint8)
    return np.reshape(flat, dims, order="F") != 0


def _write_container(path, magic: bytes, dims, payload: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(_HEADER.pack(*(int(d) for d in dims)))
        fh.write(payload)


def _read_container(path, magic: bytes, itemsize: int):
    raw = Path(path).read_bytes()
    if raw[: len(magic)] != magic:
        raise ValueError(f"{path}: bad magic {raw[:len(magic)]!r}, expected {magic!r}")
    dims = _HEADER.unpack_from(raw, len(magic))
    expected = len(magic) + _HEADER.size + itemsize * int(np.prod(dims))
    if len(raw) != expected:
        raise ValueError(f"{path}: truncated or oversized payload ({len(raw)} bytes, expected {expected})")
    return dims, raw[len(magic) + _HEADER.size :]


def write_long_csv(path, t: np.ndarray, mask: np.ndarray | None = None) -> None:
    """Write a tensor as long CSV; entries with mask=False get NaN values."""
    t = as_tensor3(t, "tensor")
    n1, n2, n3 = t.shape
    loc, tim, day = np.unravel_index(np.arange(t.size), t.shape, order="F")
    values = t.ravel(order="F").astype(float)
    if mask is not None:
        values = values.copy()
        values[~as_mask(mask, t.shape).ravel(order="F")] = np.nan
    frame = pd.DataFrame({"location": loc, "time": tim, "day": day, "value": values})
    frame.to_csv(path, index=False)


def read_long_csv(path, dims: tuple[int, int, int] | None = None):
    """Read a long CSV into ``(tensor, mask)``.

    NaN/empty values and absent rows become mask=False (value 0).  `dims`
    defaults to one past the largest index seen per column.
    """
    frame = pd.read_csv(path)
    missing_cols = [c for c in LONG_CSV_COLUMNS if c not in frame.columns]
    if missing_cols:
        raise ValueError(f"{path}: missing columns {missing_cols}; expected header {','.join(LONG_CSV_COLUMNS)}")
    if len(frame) == 0:
        raise ValueError(f"{path}: no rows")
    coords = frame[["location", "time", "day"]].to_numpy()
    if not np.issubdtype(coords.dtype, np.integer):
        if not np.all(coords == np.floor(coords)):
            raise ValueError(f"{path}: indices must be integers")
        coords = coords.astype(np.int64)
    if coords.min() < 0:
        raise ValueError(f"{path}: negative indices")
    if dims is None:
        dims = tuple(int(coords[:, j].max()) + 1 for j in range(3))
    dims = tuple(int(d) for d in dims)
    if any(coords[:, j].max() >= dims[j] for j in range(3)):
        raise ValueError(f"{path}: indices exceed dims {dims}")
    flat = np.ravel_multi_index((coords[:, 0], coords[:, 1], coords[:, 2]), dims)
    if len(np.unique(flat)) != len(flat):
        raise ValueError(f"{path}: duplicate (location, time, day) rows")
    t = np.zeros(dims)
    mask = np.zeros(dims, dtype=bool)
    values = frame["value"].to_numpy(dtype=float)
    observed = np.isfinite(values)
    idx = (coords[:, 0], coords[:, 1], coords[:, 2])
    t[idx] = np.where(observed, values, 0.0)
    mask[idx] = observed
    return t, mask


def write_tensor(path, t: np.ndarray, fmt: str = "binary", mask: np.ndarray | None = None) -> None:
    """Write a tensor in the requested format (``binary`` or ``csv``)."""
    if fmt == "binary":
        write_dense(path, t)
    elif fmt == "csv":
        write_long_csv(path, t, mask)
    else:
        raise ValueError(f"unknown format {fmt!r}, expected 'binary' or 'csv'")


def read_tensor(path, fmt: str | None = None, dims=None):
    """Read ``(tensor, mask)`` from either format.

    With ``fmt=None`` the format is sniffed: the binary magic wins, anything
    else is parsed as long CSV.  The mask is all-True for binary tensors
    (which carry no NaNs) and NaN-derived for CSV.
    """
    if fmt is None:
        with open(path, "rb") as fh:
            head = fh.read(len(MAGIC_DENSE))
        fmt = "binary" if head in (MAGIC_DENSE, MAGIC_MASK) else "csv"
    if fmt == "binary":
        t = read_dense(path)
        return t, np.ones(t.shape, dtype=bool)
    if fmt == "csv":
        return read_long_csv(path, dims)
    raise ValueError(f"unknown format {fmt!r}, expected 'binary' or 'csv'")
