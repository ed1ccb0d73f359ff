"""Best-first approximate and exact k-NN over the envelope tree."""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ..distance import (
    DTW,
    DtwBand,
    _candidate_sq,
    _lb_keogh_sq,
    _load_candidate,
    dtw_query_envelope,
)
from ..series import PaaVector, SubsequenceRef, _paa_kernel, znormalize

__all__ = ["QueryResult", "PreparedQuery", "mindist_ulisse", "search"]

# relative slack on every prune decision, so rounding in a lower bound that
# is tight in exact arithmetic can never discard a true answer
PRUNE_SLACK = 1.0 + 1e-9


@dataclass
class QueryResult:
    refs: list[SubsequenceRef]
    distances: np.ndarray
    metadata: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.refs)

    def to_dict(self, counters: bool = True) -> dict:
        out = {
            "query": self.metadata,
            "results": [
                {"rank": r + 1, "series_id": ref.series_id, "offset": ref.offset,
                 "length": ref.length, "distance": float(d)}
                for r, (ref, d) in enumerate(zip(self.refs, self.distances))
            ],
        }
        if counters:
            out["counters"] = self.counters
        return out

    def to_json(self, counters: bool = False) -> str:
        """Deterministic payload; counters are off by default as they carry timings."""
        return json.dumps(self.to_dict(counters=counters), sort_keys=True)


@dataclass
class PreparedQuery:
    """Query in the index's normalization mode plus everything pruning needs."""

    values: np.ndarray
    lower: np.ndarray       # DTW envelope (equal to ``values`` for ED)
    upper: np.ndarray
    paa_lower: np.ndarray   # PAA of lower/upper, first |Q| // s segments
    paa_upper: np.ndarray
    kind: int
    radius: int


def prepare_query(q, segment_length: int, normalized: bool, kind: int,
                  dtw_fraction: float = 0.05) -> PreparedQuery:
    q = np.asarray(q, dtype=np.float64)
    qn = znormalize(q) if normalized else q.copy()
    m = qn.shape[0]
    if kind == DTW:
        radius = DtwBand.from_fraction(m, dtw_fraction).radius
        lower, upper = dtw_query_envelope(qn, radius)
    else:
        radius = 0
        lower, upper = qn, qn
    s = int(segment_length)
    if m >= s:
        pl, pu = _paa_kernel(lower, s), _paa_kernel(upper, s)
    else:
        pl = pu = np.empty(0)
    return PreparedQuery(qn, lower, upper, pl, pu, kind, radius)


def mindist_ulisse(q_paa, region_lower, region_upper, length: int,
                   q_paa_upper=None) -> float:
    """Lower bound on the distance from a query to anything an envelope represents.

    ``q_paa`` is the query PAA (the PAA of the DTW lower envelope when
    ``q_paa_upper`` is given).  Only the first ``length // s`` segments count.
    """
    if isinstance(q_paa, PaaVector):
        s = q_paa.segment_length
        qlo = q_paa.coefficients
    else:
        raise TypeError("q_paa must be a PaaVector")
    qhi = qlo if q_paa_upper is None else np.asarray(
        q_paa_upper.coefficients if isinstance(q_paa_upper, PaaVector) else q_paa_upper)
    w = int(length) // s
    return _mindist(qlo[:w], qhi[:w], np.asarray(region_lower)[:w],
                    np.asarray(region_upper)[:w], s)


def _mindist(qlo, qhi, lo, hi, s) -> float:
    w = qlo.shape[0]
    if w == 0:
        return 0.0
    gap = np.maximum(np.maximum(lo[:w] - qhi, qlo - hi[:w]), 0.0)
    return float(np.sqrt(s * np.dot(gap, gap)))


def _mindist_rows(qlo, qhi, lo, hi, s) -> np.ndarray:
    w = qlo.shape[0]
    if w == 0:
        return np.zeros(lo.shape[0])
    gap = np.maximum(np.maximum(lo[:, :w] - qhi, qlo - hi[:, :w]), 0.0)
    return np.sqrt(s * np.einsum("ij,ij->i", gap, gap))


# -- kernels ---------------------------------------------------------------

@njit(cache=True, inline="always")
def _before(d, sid, off, d2, sid2, off2):
    if d != d2:
        return d < d2
    if sid != sid2:
        return sid < sid2
    return off < off2


@njit(cache=True)
def _topk_push(top_d, top_sid, top_off, d, sid, off):
    k = top_d.shape[0]
    if not _before(d, sid, off, top_d[k - 1], top_sid[k - 1], top_off[k - 1]):
        return False
    pos = k - 1
    while pos > 0 and _before(d, sid, off, top_d[pos - 1], top_sid[pos - 1], top_off[pos - 1]):
        top_d[pos] = top_d[pos - 1]
        top_sid[pos] = top_sid[pos - 1]
        top_off[pos] = top_off[pos - 1]
        pos -= 1
    top_d[pos] = d
    top_sid[pos] = sid
    top_off[pos] = off
    return True


@njit(cache=True)
def _visit(buf, means, stds, q, qlo, qhi, bases, sids, starts, stops, kind, znorm, r,
           use_lb, slack, top_d, top_sid, top_off):
    """Score every candidate offset in ``[starts[e], stops[e])`` of each range.

    Distances are squared.  Returns (computed, lb_pruned, improvements).
    """
    m = q.shape[0]
    cand = np.empty(m)
    prev = np.empty(m + 1)
    cur = np.empty(m + 1)
    k = top_d.shape[0]
    computed = 0
    lb_pruned = 0
    improved = 0
    for e in range(starts.shape[0]):
        base = bases[e]
        sid = sids[e]
        for o in range(starts[e], stops[e]):
            pos = base + o
            _load_candidate(buf, pos, m, means[pos], stds[pos], znorm, cand)
            if use_lb:
                thr = top_d[k - 1]
                if _lb_keogh_sq(cand, qlo, qhi) > thr * slack:
                    lb_pruned += 1
                    continue
            d = _candidate_sq(q, cand, kind, r, prev, cur)
            computed += 1
            if _topk_push(top_d, top_sid, top_off, d, sid, o):
                improved += 1
    return computed, lb_pruned, improved


@njit(cache=True)
def _scan(buf, means, stds, q, base, count, kind, znorm, r):
    m = q.shape[0]
    cand = np.empty(m)
    prev = np.empty(m + 1)
    cur = np.empty(m + 1)
    out = np.empty(count)
    for o in range(count):
        pos = base + o
        _load_candidate(buf, pos, m, means[pos], stds[pos], znorm, cand)
        out[o] = _candidate_sq(q, cand, kind, r, prev, cur)
    return out


# -- traversal -------------------------------------------------------------

class _Search:
    def __init__(self, index, pq: PreparedQuery, k: int):
        self.index = index
        self.pq = pq
        self.k = k
        self.m = pq.values.shape[0]
        self.s = index.segment_length
        self.w = self.m // self.s
        self.qlo = pq.paa_lower[: self.w]
        self.qhi = pq.paa_upper[: self.w]
        self.means, self.stds = index._flat_stats(self.m)
        self.top_d = np.full(k, np.inf)
        self.top_sid = np.full(k, np.iinfo(np.int64).max, dtype=np.int64)
        self.top_off = np.full(k, np.iinfo(np.int64).max, dtype=np.int64)
        self.counters = {
            "nodes_total": index.tree_.node_count,
            "nodes_visited": 0,
            "nodes_pruned": 0,
            "leaves_visited": 0,
            "envelopes_pruned": 0,
            "distances_computed": 0,
            "lb_keogh_pruned": 0,
            "approx_leaf_improvements": [],
        }
        self.heap: list = []
        self._push(index.tree_.root)

    def _push(self, node):
        md = _mindist(self.qlo, self.qhi, node.lo, node.hi, self.s)
        heapq.heappush(self.heap, (md, node.node_id, node))

    def threshold(self) -> float:
        return float(np.sqrt(self.top_d[-1]))

    def _visit_leaf(self, node, prune_envelopes: bool) -> int:
        idx = np.asarray(node.entries, dtype=np.int64)
        index = self.index
        cols = index.store_.arrays()
        if prune_envelopes and idx.size:
            md = _mindist_rows(self.qlo, self.qhi, node.env_lo, node.env_hi, self.s)
            keep = md <= self.threshold() * PRUNE_SLACK
            self.counters["envelopes_pruned"] += int(idx.size - keep.sum())
            idx = idx[keep]
        sids = cols["series_id"][idx]
        lengths = index.lengths_[sids]
        stops = np.minimum(cols["stop"][idx], lengths - self.m + 1)
        starts = cols["start"][idx]
        computed, lb_pruned, improved = _visit(
            index.buffer_, self.means, self.stds, self.pq.values, self.pq.lower, self.pq.upper,
            index.bases_[sids], sids, starts, stops, self.pq.kind, index.normalize, self.pq.radius,
            self.pq.kind == DTW, PRUNE_SLACK ** 2, self.top_d, self.top_sid, self.top_off)
        self.counters["distances_computed"] += int(computed)
        self.counters["lb_keogh_pruned"] += int(lb_pruned)
        self.counters["leaves_visited"] += 1
        return int(improved)

    def approximate(self):
        while self.heap:
            _, _, node = heapq.heappop(self.heap)
            self.counters["nodes_visited"] += 1
            if node.is_leaf:
                improved = self._visit_leaf(node, prune_envelopes=False)
                self.counters["approx_leaf_improvements"].append(improved > 0)
                if improved == 0:
                    return
            else:
                for child in node.children:
                    self._push(child)

    def exact(self):
        while self.heap:
            md, _, node = heapq.heappop(self.heap)
            if md > self.threshold() * PRUNE_SLACK:
                # heap order: everything still queued is at least as far
                self.counters["nodes_pruned"] += node.size + sum(n.size for _, _, n in self.heap)
                self.heap.clear()
                return
            self.counters["nodes_visited"] += 1
            if node.is_leaf:
                self._visit_leaf(node, prune_envelopes=True)
            else:
                for child in node.children:
                    self._push(child)

    def result(self, exact: bool, metric: str) -> QueryResult:
        found = np.isfinite(self.top_d)
        series = self.index.series_
        refs = [SubsequenceRef(series[int(s)].id, int(o), self.m)
                for s, o in zip(self.top_sid[found], self.top_off[found])]
        if not exact:
            self.counters["nodes_unvisited"] = (
                self.counters["nodes_total"] - self.counters["nodes_visited"])
        meta = {
            "length": self.m,
            "k": self.k,
            "metric": metric,
            "mode": "znorm" if self.index.normalize else "raw",
            "exact": exact,
            "dtw_radius": self.pq.radius,
        }
        return QueryResult(refs, np.sqrt(self.top_d[found]), meta, self.counters)


def search(index, q, k: int, metric: str, kind: int, exact: bool) -> QueryResult:
    pq = prepare_query(q, index.segment_length, index.normalize, kind, index.dtw_radius)
    run = _Search(index, pq, k)
    run.approximate()
    if exact:
        run.exact()
    return run.result(exact, metric)
