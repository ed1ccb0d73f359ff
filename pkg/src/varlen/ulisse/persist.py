"""Index files.

Layout (little-endian)::

    b"ULSE", uint32 version
    int64 min_length, max_length, segment_length, alphabet_size, gamma (-1 = default),
          leaf_capacity
    uint8 normalize, uint8 metric, float64 dtw_radius, float64 build_time
    32 bytes  SHA-256 digest of the dataset's canonical encoding
    uint64 envelope count E, uint64 segments w
    E x int64 series position, start, stop, defined segments
    E*w x float64 lower, upper;  E*w x int64 lower symbols, upper symbols
    uint64 node count, then nodes in pre-order:
        int64 split, uint8 child count, w x int64 bits, prefix, lower symbols,
        upper symbols, uint64 entry count, entries x int64

Raw values are not stored: ``load_index`` re-binds the dataset and checks
its digest.
"""

from __future__ import annotations

import io
import os
import struct
from pathlib import Path

import numpy as np

from ..distance import metric_code
from ..io import dataset_digest
from ..series import gaussian_breakpoints
from .index import UlisseIndex, as_collection
from .tree import EnvelopeStore, EnvelopeTree, Node

__all__ = ["IndexFormatError", "save_index", "load_index", "index_bytes"]

MAGIC = b"ULSE"
VERSION = 1
_HEAD = struct.Struct("<4sI6qBBdd32s")
_METRICS = {0: "euclidean", 1: "dtw"}


class IndexFormatError(ValueError):
    pass


def _i64(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<i8").tobytes()


def _f64(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def index_bytes(index: UlisseIndex) -> bytes:
    buf = io.BytesIO()
    buf.write(_HEAD.pack(
        MAGIC, VERSION, index.min_length, index.max_length, index.segment_length,
        index.alphabet_size, -1 if index.gamma is None else int(index.gamma),
        index.leaf_capacity, int(bool(index.normalize)), metric_code(index.metric),
        float(index.dtw_radius), float(index.build_time_), dataset_digest(index.series_)))
    cols = index.store_.arrays()
    n, w = len(index.store_), index.store_.w
    buf.write(struct.pack("<QQ", n, w))
    for name in ("series_id", "start", "stop", "n_defined"):
        buf.write(_i64(cols[name]))
    buf.write(_f64(cols["lower"]))
    buf.write(_f64(cols["upper"]))
    buf.write(_i64(cols["sym_lower"]))
    buf.write(_i64(cols["sym_upper"]))
    nodes = index.tree_.nodes()
    buf.write(struct.pack("<Q", len(nodes)))
    for node in nodes:
        buf.write(struct.pack("<qB", node.split, len(node.children)))
        for arr in (node.bits, node.prefix, node.sym_lower, node.sym_upper):
            buf.write(_i64(arr))
        buf.write(struct.pack("<Q", len(node.entries)))
        buf.write(_i64(node.entries))
    return buf.getvalue()


def save_index(path, index: UlisseIndex) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(index_bytes(index))
    os.replace(tmp, path)
    return path


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, size: int) -> int:
        if self.pos + size > len(self.data):
            raise IndexFormatError(f"truncated index file at byte {self.pos}")
        at = self.pos
        self.pos += size
        return at

    def unpack(self, fmt: str):
        s = struct.Struct(fmt)
        return s.unpack_from(self.data, self.take(s.size))

    def array(self, dtype: str, count: int) -> np.ndarray:
        at = self.take(8 * count)
        return np.frombuffer(self.data, dtype=dtype, count=count, offset=at).astype(
            np.float64 if dtype == "<f8" else np.int64)


def load_index(path, collection) -> UlisseIndex:
    """Rebuild a saved index over ``collection`` (the dataset it was built from)."""
    r = _Reader(Path(path).read_bytes())
    (magic, version, lmin, lmax, s, alpha, gamma, cap, norm, metric, radius,
     build_time, digest) = r.unpack(_HEAD.format)
    if magic != MAGIC:
        raise IndexFormatError(f"bad magic {magic!r} at byte 0")
    if version != VERSION:
        raise IndexFormatError(f"unsupported index version {version}")
    series = as_collection(collection)
    if dataset_digest(series) != digest:
        raise IndexFormatError("dataset digest does not match the index")
    index = UlisseIndex(min_length=lmin, max_length=lmax, segment_length=s, alphabet_size=alpha,
                        gamma=None if gamma < 0 else gamma, normalize=bool(norm),
                        leaf_capacity=cap, metric=_METRICS[metric], dtw_radius=radius)
    index.breakpoints_ = gaussian_breakpoints(alpha)
    index._attach(series)
    n, w = r.unpack("<QQ")
    ints = [r.array("<i8", n) for _ in range(4)]
    lower = r.array("<f8", n * w).reshape(n, w)
    upper = r.array("<f8", n * w).reshape(n, w)
    sym_l = r.array("<i8", n * w).reshape(n, w)
    sym_u = r.array("<i8", n * w).reshape(n, w)
    store = EnvelopeStore(w)
    for e in range(n):
        store.append(int(ints[0][e]), int(ints[1][e]), int(ints[2][e]), int(ints[3][e]),
                     lower[e], upper[e], sym_l[e], sym_u[e])
    tree = EnvelopeTree(store, index.breakpoints_, cap)
    (count,) = r.unpack("<Q")
    flat = []
    for _ in range(count):
        split, n_children = r.unpack("<qB")
        bits, prefix, lo, hi = (r.array("<i8", w) for _ in range(4))
        node = Node(bits, prefix)
        node.sym_lower, node.sym_upper, node.split = lo, hi, split
        (n_entries,) = r.unpack("<Q")
        node.entries = [int(e) for e in r.array("<i8", n_entries)]
        flat.append((node, n_children))
    if r.pos != len(r.data):
        raise IndexFormatError(f"trailing bytes at {r.pos}")
    tree.root = _relink(flat)
    tree.finalize()
    index.store_ = store
    index.tree_ = tree
    index.build_time_ = build_time
    return index


def _relink(flat: list[tuple[Node, int]]) -> Node:
    pos = 0

    def build() -> Node:
        nonlocal pos
        if pos >= len(flat):
            raise IndexFormatError("node dump ends early")
        node, n_children = flat[pos]
        pos += 1
        node.children = [build() for _ in range(n_children)]
        return node

    root = build()
    if pos != len(flat):
        raise IndexFormatError("node dump has unreachable nodes")
    return root
