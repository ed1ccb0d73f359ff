"""Dataset files.

Binary layout (all little-endian)::

    b"USDS"            magic
    uint32             format version (1)
    uint64             series count c
    c x uint64         series lengths
    sum(lengths) x f64 values, series after series

Series ids are positional on read.  CSV files hold one value per line with
an optional header line.
"""

from __future__ import annotations

import hashlib
import io
import os
import struct
from pathlib import Path

import numpy as np

from .series import DataSeries, build_series

__all__ = ["DatasetFormatError", "write_dataset", "read_dataset", "dataset_bytes",
           "dataset_digest", "read_csv", "write_csv"]

MAGIC = b"USDS"
VERSION = 1
_HEAD = struct.Struct("<4sIQ")


class DatasetFormatError(ValueError):
    """Malformed dataset input; ``position`` is a byte offset or 1-based line number."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at {position})")
        self.position = position


def _as_list(collection) -> list[DataSeries]:
    if isinstance(collection, DataSeries):
        return [collection]
    return [d if isinstance(d, DataSeries) else build_series(d, i)
            for i, d in enumerate(collection)]


def dataset_bytes(collection) -> bytes:
    series = _as_list(collection)
    buf = io.BytesIO()
    buf.write(_HEAD.pack(MAGIC, VERSION, len(series)))
    buf.write(np.array([len(d) for d in series], dtype="<u8").tobytes())
    for d in series:
        buf.write(np.ascontiguousarray(d.values, dtype="<f8").tobytes())
    return buf.getvalue()


def dataset_digest(collection) -> bytes:
    """SHA-256 of the canonical binary encoding."""
    return hashlib.sha256(dataset_bytes(collection)).digest()


def write_dataset(path, collection) -> Path:
    path = Path(path)
    data = dataset_bytes(collection)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    return path


def parse_dataset(data: bytes) -> list[DataSeries]:
    if len(data) < _HEAD.size:
        raise DatasetFormatError(f"truncated header: {len(data)} of {_HEAD.size} bytes", len(data))
    magic, version, count = _HEAD.unpack_from(data, 0)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise DatasetFormatError(f"unsupported version {version}", 4)
    pos = _HEAD.size
    need = 8 * count
    if len(data) - pos < need:
        raise DatasetFormatError(f"truncated length table: need {need} bytes", len(data))
    lengths = np.frombuffer(data, dtype="<u8", count=count, offset=pos).astype(np.int64)
    pos += need
    total = int(lengths.sum())
    have = (len(data) - pos) // 8
    if have < total:
        raise DatasetFormatError(f"truncated payload: {have} of {total} values", pos + 8 * have)
    if len(data) - pos != 8 * total:
        raise DatasetFormatError("trailing bytes after payload", pos + 8 * total)
    values = np.frombuffer(data, dtype="<f8", count=total, offset=pos).astype(np.float64)
    out = []
    start = 0
    for i, n in enumerate(lengths):
        if n == 0:
            raise DatasetFormatError(f"series {i} is empty", _HEAD.size + 8 * i)
        chunk = values[start:start + n]
        bad = np.flatnonzero(~np.isfinite(chunk))
        if bad.size:
            raise DatasetFormatError(f"non-finite value in series {i}",
                                     pos + 8 * (start + int(bad[0])))
        out.append(build_series(chunk, i))
        start += n
    return out


def read_dataset(path) -> list[DataSeries]:
    return parse_dataset(Path(path).read_bytes())


def read_csv(path, id: int = 0) -> DataSeries:
    """One value per line; a non-numeric first line is taken as a header."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                values.append(float(text))
            except ValueError:
                if lineno == 1:
                    continue
                raise DatasetFormatError(f"cannot parse {text!r} as a number", lineno) from None
    if not values:
        raise DatasetFormatError("no values", 0)
    return build_series(values, id)


def write_csv(path, d: DataSeries, header: str | None = "value"):
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(header + "\n")
        for v in d.values:
            fh.write(repr(float(v)) + "\n")
