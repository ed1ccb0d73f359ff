"""Brute-force ground truth.

These routines exist to be slow and right.  ``scan_knn`` evaluates every
admissible subsequence through the same per-candidate kernel the index uses
(so distances agree bit-for-bit); ``brute_motif`` and ``brute_discords``
materialize the full pair matrix from explicitly z-normalized windows, an
arithmetic path independent of the dot-product recurrences in the MAD engine.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .distance import metric_code, znorm_euclidean
from .rules import admissible_pair_count, exclusion_zone, rank_order, select_non_overlapping
from .series import DataSeries, SubsequenceRef, window_stats
from .ulisse.index import as_collection
from .ulisse.search import QueryResult, _scan, prepare_query

__all__ = ["OracleReport", "scan_knn", "brute_motif", "brute_discords", "pair_matrix",
           "compare_ranked", "compare_discovery"]

TOL = 1e-6
TIE = 1e-9


@dataclass
class OracleReport:
    task: dict
    result: object
    wall_time: float
    distance_count: int
    extra: dict = field(default_factory=dict)


def scan_knn(collection, Q, k: int, metric: str = "euclidean", normalize: bool = False,
             dtw_radius: float = 0.05, length_range: tuple[int, int] | None = None) -> OracleReport:
    """Exhaustive k-NN over every (series, offset) at length ``len(Q)``."""
    t0 = time.perf_counter()
    series = as_collection(collection)
    q = np.asarray(Q, dtype=np.float64).ravel()
    m = q.shape[0]
    if length_range is not None and not length_range[0] <= m <= length_range[1]:
        raise ValueError(f"query length {m} outside {list(length_range)}")
    if m < 1 or m > max(len(d) for d in series):
        raise ValueError(f"query length {m} out of range")
    kind = metric_code(metric)
    pq = prepare_query(q, 1, normalize, kind, dtw_radius)
    all_d, all_pos, all_off = [], [], []
    for pos, d in enumerate(series):
        count = len(d) - m + 1
        if count <= 0:
            continue
        if normalize:
            means, stds = window_stats(d, m)
        else:
            means = stds = np.zeros(count)
        sq = _scan(d.values, means, stds, pq.values, 0, count, kind, normalize, pq.radius)
        all_d.append(sq)
        all_pos.append(np.full(count, pos, dtype=np.int64))
        all_off.append(np.arange(count, dtype=np.int64))
    sq = np.concatenate(all_d)
    pos = np.concatenate(all_pos)
    off = np.concatenate(all_off)
    order = rank_order(sq, off, pos)[:k]
    refs = [SubsequenceRef(series[int(pos[i])].id, int(off[i]), m) for i in order]
    meta = {"length": m, "k": k, "metric": metric, "mode": "znorm" if normalize else "raw",
            "exact": True, "dtw_radius": pq.radius}
    res = QueryResult(refs, np.sqrt(sq[order]), meta, {"distances_computed": int(sq.size)})
    return OracleReport({"task": "knn", **meta}, res, time.perf_counter() - t0, int(sq.size))


def _normalized_windows(values: np.ndarray, length: int) -> np.ndarray:
    W = sliding_window_view(values, length)
    mu = W.mean(axis=1, keepdims=True)
    sd = W.std(axis=1, keepdims=True)
    sd[np.ptp(W, axis=1) == 0] = 0.0
    safe = np.where(sd > 0, sd, 1.0)
    return np.where(sd > 0, (W - mu) / safe, 0.0)


def pair_matrix(d: DataSeries | np.ndarray, length: int, rows: slice | None = None) -> np.ndarray:
    """z-normalized distances between windows, trivial matches set to ``inf``."""
    values = d.values if isinstance(d, DataSeries) else np.asarray(d, dtype=np.float64)
    Z = _normalized_windows(values, length)
    n = Z.shape[0]
    rows = rows or slice(0, n)
    idx = np.arange(n)[rows]
    sq = np.einsum("ij,ij->i", Z, Z)
    D2 = sq[idx, None] + sq[None, :] - 2.0 * (Z[idx] @ Z.T)
    D = np.sqrt(np.maximum(D2, 0.0))
    zone = exclusion_zone(length)
    D[np.abs(idx[:, None] - np.arange(n)[None, :]) <= zone] = np.inf
    return D


def _check_length(n: int, length: int):
    if length < 2 or length > n // 2:
        raise ValueError(f"length {length} needs 2 <= length <= {n // 2}")


def _row_blocks(n: int, length: int, budget: int = 2 ** 24):
    step = max(1, budget // max(n, 1))
    for a in range(0, n, step):
        yield slice(a, min(n, a + step))


def brute_motif(d: DataSeries, length: int) -> OracleReport:
    """Exact minimum-distance non-trivial pair at ``length``; ties go to smaller offsets."""
    t0 = time.perf_counter()
    n_total = len(d)
    _check_length(n_total, length)
    n = n_total - length + 1
    best = (np.inf, -1, -1)
    for rows in _row_blocks(n, length):
        D = pair_matrix(d, length, rows)
        flat = int(np.argmin(D))
        i, j = divmod(flat, n)
        i += rows.start
        cand = (float(D.flat[flat]), min(i, j), max(i, j))
        if cand < best:
            best = cand
    _, a, b = best
    values = d.values
    dist = znorm_euclidean(values[a:a + length], values[b:b + length])
    count = admissible_pair_count(n, length)
    return OracleReport({"task": "motif", "length": length}, ((a, b), dist),
                        time.perf_counter() - t0, count)


def neighbor_distances(d: DataSeries, length: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    """Per anchor, the ``b`` smallest non-trivial distances and their offsets."""
    n = len(d) - length + 1
    dist = np.empty((n, b))
    where = np.empty((n, b), dtype=np.int64)
    for rows in _row_blocks(n, length):
        D = pair_matrix(d, length, rows)
        for r in range(D.shape[0]):
            row = D[r]
            cand = np.argpartition(row, b - 1)[:b] if b < n else np.arange(n)
            # order the pick by (distance, offset); partition ties may miss an
            # equal-distance smaller offset, so widen to every tied value
            edge = row[cand].max()
            cand = np.flatnonzero(row <= edge)
            order = cand[np.lexsort((cand, row[cand]))][:b]
            dist[rows.start + r] = row[order]
            where[rows.start + r] = order
    return dist, where


def brute_discords(d: DataSeries, length: int, a: int, b: int,
                   exclude_constant: bool = False) -> OracleReport:
    """Top-``a`` non-overlapping discords for each neighbor rank ``m`` in ``1..b``.

    Returns ``{m: [(offset, distance), ...]}`` as the report result.
    """
    t0 = time.perf_counter()
    if a < 1 or b < 1:
        raise ValueError("a and b must be >= 1")
    _check_length(len(d), length)
    n = len(d) - length + 1
    nn, _ = neighbor_distances(d, length, b)
    offsets = np.arange(n)
    keep = np.ones(n, dtype=bool)
    if exclude_constant:
        _, sd = window_stats(d, length)
        keep = sd > 0
    grid = {}
    for m in range(1, b + 1):
        vals = np.where(keep, nn[:, m - 1], -np.inf)
        picked = select_non_overlapping(vals, offsets, a, length)
        grid[m] = [(int(offsets[p]), float(vals[p])) for p in picked]
    count = admissible_pair_count(n, length)
    return OracleReport({"task": "discords", "length": length, "a": a, "b": b}, grid,
                        time.perf_counter() - t0, count, {"neighbors": nn})


# -- diffing ---------------------------------------------------------------

def _close(a: float, b: float, tol: float) -> bool:
    if np.isinf(a) or np.isinf(b):
        return a == b
    return abs(a - b) <= tol


def _tied(a: float, b: float) -> bool:
    return _close(a, b, TIE * max(1.0, abs(b)))


def compare_ranked(engine, oracle, tol: float = TOL) -> str | None:
    """Compare two ranked ``[(offset, distance), ...]`` lists.

    Returns ``None`` on an exact match, ``"tie"`` when the lists part ways
    only where two candidates are tied to within rounding (after that point
    any tie-break may cascade, so only distances are compared), and
    ``"mismatch"`` otherwise.
    """
    if len(engine) != len(oracle):
        return "mismatch"
    status = None
    for (go, gd), (xo, xd) in zip(engine, oracle):
        if not _close(gd, xd, tol):
            return "mismatch"
        if status is None and go != xo:
            if not _tied(gd, xd):
                return "mismatch"
            status = "tie"
    return status


def compare_discovery(res, d: DataSeries, lengths, a: int, b: int,
                      exclude_constant: bool = False) -> tuple[list[dict], int]:
    """Cell-by-cell diff of a discovery run against the quadratic oracles.

    Returns the mismatching cells and the number of tie-equivalent cells.
    """
    diffs, ties = [], 0
    for L in lengths:
        if L in res.motifs.entries:
            ab, dist = brute_motif(d, L).result
            e = res.motifs[L]
            st = compare_ranked([(e.offsets, e.distance)], [(ab, dist)])
            if st == "mismatch":
                diffs.append({"length": L, "kind": "motif",
                              "engine": [list(e.offsets), e.distance],
                              "oracle": [list(ab), dist]})
            ties += st == "tie"
        grid = brute_discords(d, L, a, b, exclude_constant).result
        for m in range(1, b + 1):
            got, exp = res.discords[(L, m)], grid[m]
            st = compare_ranked(got, exp)
            if st == "mismatch":
                diffs.append({"length": L, "kind": "discord", "m": m, "engine": got,
                              "oracle": exp})
            ties += st == "tie"
    return diffs, ties
