"""Exact variable-length motif and discord discovery.

One STOMP pass at the base length keeps, per anchor, the ``p`` candidates
with the best lower-bound key.  Each longer length then extends those
candidates' dot products by one trailing product, which gives exact
distances for the partial profiles, and a single O(1) bound evaluation per
anchor, ``maxLB``, certifies what lies outside them.  Anchors that cannot be
certified get their full profile recomputed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange
from numpy.lib.stride_tricks import sliding_window_view

from ..distance import _znorm_dist, znorm_euclidean
from ..rules import exclusion_zone, select_non_overlapping
from ..series import DataSeries, window_stats
from .bounds import LowerBoundState, _lb_from_key, lb_from_keys
from .profile import _push_sorted, _stomp_candidates, centered, check_length

__all__ = [
    "PartialDistanceProfile",
    "MotifEntry",
    "MotifResult",
    "DiscordGrid",
    "Discovery",
    "default_candidates",
    "partial_profile",
    "validity_check",
    "exact_motif_at",
    "exact_discords_at",
    "discover_range",
]

SLACK = 1e-9
RECOMPUTE_CHUNK = 256


# -- result types ----------------------------------------------------------

@dataclass(frozen=True)
class PartialDistanceProfile:
    """The ``p`` best-bounded candidates of one anchor, with exact distances."""

    anchor: int
    length: int
    offsets: np.ndarray
    distances: np.ndarray
    max_lb: float            # +inf when every admissible candidate is present

    def kth(self, m: int) -> float:
        if self.distances.size < m:
            return np.inf
        return float(np.partition(self.distances, m - 1)[m - 1])

    def nearest(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        order = np.lexsort((self.offsets, self.distances))[:m]
        return self.distances[order], self.offsets[order]


@dataclass(frozen=True)
class MotifEntry:
    length: int
    offsets: tuple[int, int]
    distance: float

    @property
    def normalized_distance(self) -> float:
        """``d / sqrt(length)``, comparable across lengths."""
        return self.distance / math.sqrt(self.length)


@dataclass
class MotifResult:
    entries: dict[int, MotifEntry] = field(default_factory=dict)

    def __getitem__(self, length: int) -> MotifEntry:
        return self.entries[length]

    def __iter__(self):
        return iter(self.entries[k] for k in sorted(self.entries))

    def __len__(self):
        return len(self.entries)

    def best(self) -> MotifEntry:
        """Motif with the smallest length-normalized distance; shorter wins ties."""
        return min(self, key=lambda e: (e.normalized_distance, e.length))


@dataclass
class DiscordGrid:
    """``cells[(length, m)]`` is a ranked list of ``(offset, m-th NN distance)``."""

    cells: dict[tuple[int, int], list[tuple[int, float]]] = field(default_factory=dict)

    def __getitem__(self, key: tuple[int, int]) -> list[tuple[int, float]]:
        return self.cells[key]

    def lengths(self) -> list[int]:
        return sorted({k[0] for k in self.cells})

    def ms(self) -> list[int]:
        return sorted({k[1] for k in self.cells})

    def at(self, length: int) -> dict[int, list[tuple[int, float]]]:
        return {m: v for (ell, m), v in sorted(self.cells.items()) if ell == length}


@dataclass
class Discovery:
    motifs: MotifResult
    discords: DiscordGrid
    counters: dict
    params: dict


def default_candidates(n_windows: int, b: int = 1) -> int:
    return max(16, math.ceil(0.05 * n_windows), b)


# -- kernels ---------------------------------------------------------------

@njit(cache=True, parallel=True)
def _advance(x, L, base, mu, sig, sig_base, cand, cqt, ncand, kb, top_d, top_j, max_lb):
    """Extend every kept candidate to length ``L``; rows beyond the last window are skipped."""
    count = x.shape[0] - L + 1
    zone = L // 2
    done = np.zeros(count, dtype=np.int64)
    for i in prange(count):
        td = top_d[i]
        tj = top_j[i]
        td[:] = np.inf
        tj[:] = -1
        tail = x[i + L - 1]
        c_done = 0
        for c in range(ncand[i]):
            j = cand[i, c]
            if j < 0:
                continue
            if j >= count or abs(i - j) <= zone:
                cand[i, c] = -1       # inadmissible now means inadmissible for good
                continue
            cqt[i, c] += tail * x[j + L - 1]
            _push_sorted(td, tj, _znorm_dist(cqt[i, c], L, mu[i], sig[i], mu[j], sig[j]), j)
            c_done += 1
        done[i] = c_done
        max_lb[i] = _lb_from_key(kb[i], L, base, sig_base[i], sig[i])
    return done.sum()


@njit(cache=True, parallel=True)
def _summarize(qt, rows, L, mu, sig, top_d, top_j):
    zone = L // 2
    count = qt.shape[1]
    for r in prange(rows.shape[0]):
        i = rows[r]
        td = top_d[i]
        tj = top_j[i]
        td[:] = np.inf
        tj[:] = -1
        for j in range(count):
            if abs(i - j) <= zone:
                continue
            _push_sorted(td, tj, _znorm_dist(qt[r, j], L, mu[i], sig[i], mu[j], sig[j]), j)


# -- per-length extraction -------------------------------------------------

class _LengthState:
    """Per-anchor summaries at one length plus the means to make any row exact."""

    def __init__(self, x: np.ndarray, length: int, mu, sig, top_d, top_j, max_lb, counters):
        self.x = x
        self.length = length
        self.mu = mu
        self.sig = sig
        self.top_d = top_d
        self.top_j = top_j
        self.max_lb = max_lb
        self.exact = np.zeros(top_d.shape[0], dtype=bool)
        self.counters = counters
        self._windows = None

    @property
    def count(self) -> int:
        return self.top_d.shape[0]

    def recompute(self, rows: np.ndarray):
        """Full distance profiles for ``rows`` (dense BLAS dot products)."""
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size == 0:
            return
        if self._windows is None:
            self._windows = np.ascontiguousarray(sliding_window_view(self.x, self.length))
        W = self._windows
        for a in range(0, rows.size, RECOMPUTE_CHUNK):
            chunk = rows[a:a + RECOMPUTE_CHUNK]
            _summarize(W[chunk] @ W.T, chunk, self.length, self.mu, self.sig,
                       self.top_d, self.top_j)
        self.exact[rows] = True
        self.max_lb[rows] = np.inf
        n = self.count
        zone = exclusion_zone(self.length)
        admissible = n - (np.minimum(rows + zone, n - 1) - np.maximum(rows - zone, 0) + 1)
        self.counters["profiles_recomputed"] += int(rows.size)
        self.counters["true_distances"] += int(admissible.sum())

    def valid(self, m: int) -> np.ndarray:
        return self.exact | (self.top_d[:, m - 1] <= self.max_lb)

    def motif(self) -> MotifEntry:
        self._ensure_motif()
        d0 = self.top_d[:, 0]
        j0 = self.top_j[:, 0]
        i = np.arange(self.count)
        a = np.minimum(i, j0)
        b = np.maximum(i, j0)
        ok = j0 >= 0
        order = np.lexsort((b[ok], a[ok], d0[ok]))
        if order.size == 0:
            raise ValueError(f"no admissible pair at length {self.length}")
        k = order[0]
        pa, pb = int(a[ok][k]), int(b[ok][k])
        L = self.length
        # re-evaluate the winner directly; the dot-product form loses digits near 0
        return MotifEntry(L, (pa, pb), znorm_euclidean(self.x[pa:pa + L], self.x[pb:pb + L]))

    def _ensure_motif(self):
        best = float(self.top_d[:, 0].min())
        # an uncertified anchor can hide a closer pair only if its bound allows it
        hidden = ~self.valid(1) & (self.max_lb <= best * (1 + SLACK))
        self.recompute(np.flatnonzero(hidden))

    def discords(self, a: int, m: int, keep: np.ndarray) -> list[tuple[int, float]]:
        offsets = np.arange(self.count)
        while True:
            known = self.valid(m)
            vals = self.top_d[:, m - 1]
            v = np.where(known & keep, vals, -np.inf)
            picks = select_non_overlapping(v, offsets, a, self.length)
            tau = v[picks[-1]] if len(picks) == a else -np.inf
            # the m-th distance inside a partial profile caps the true m-th NN
            pending = ~known & keep & (vals >= tau - abs(tau) * SLACK)
            if not pending.any():
                return [(int(offsets[p]), float(v[p])) for p in picks]
            self.recompute(np.flatnonzero(pending))


# -- single-anchor reference path ------------------------------------------

def partial_profile(d: DataSeries, i: int, length: int, state: LowerBoundState, p: int,
                    m: int = 1) -> PartialDistanceProfile:
    """Partial profile of anchor ``i`` at ``length`` from bounds cached at the base length.

    Direct O(p * length) evaluation; the engine amortizes the same quantities
    across lengths.
    """
    base = state.base_length
    if p < m:
        raise ValueError("p must be >= m")
    if length < base or i + length > len(d):
        raise ValueError(f"length {length} invalid for anchor {i}")
    n_base = len(d) - base + 1
    n = len(d) - length + 1
    zone_base = exclusion_zone(base)
    cands = np.array([j for j in range(n_base) if abs(i - j) > zone_base], dtype=np.int64)
    ents = [state.entries.get((i, int(j))) or state.add(i, int(j)) for j in cands]
    if length == base:
        lbs = np.array([e.base_distance for e in ents])
    else:
        _, sd_full = d.stats(i, length)
        lbs = lb_from_keys([e.key for e in ents], length, base, ents[0].std_i, sd_full)
    order = np.lexsort((cands, lbs))
    chosen = order[:p]
    max_lb = float(lbs[order[p - 1]]) if order.size > p else np.inf
    zone = exclusion_zone(length)
    js = cands[chosen]
    js = np.sort(js[(js < n) & (np.abs(js - i) > zone)])
    mu, sig = window_stats(d, length)
    x = d.values
    dist = np.array([_znorm_dist(float(np.dot(x[i:i + length], x[j:j + length])), length,
                                 mu[i], sig[i], mu[j], sig[j]) for j in js])
    return PartialDistanceProfile(i, length, js, dist, max_lb)


def validity_check(pp: PartialDistanceProfile, m: int = 1) -> bool:
    """True when the profile's m-th smallest distance is certified global."""
    if pp.max_lb == np.inf:
        return True
    return pp.kth(m) <= pp.max_lb


def _state_from_profiles(d: DataSeries, length: int, profiles, b: int,
                         counters: dict) -> _LengthState:
    check_length(d, length)
    n = len(d) - length + 1
    by_anchor = {pp.anchor: pp for pp in profiles}
    if sorted(by_anchor) != list(range(n)):
        raise ValueError(f"need one partial profile per anchor 0..{n - 1}")
    top_d = np.full((n, b), np.inf)
    top_j = np.full((n, b), -1, dtype=np.int64)
    max_lb = np.empty(n)
    for i, pp in by_anchor.items():
        if pp.length != length:
            raise ValueError("profiles must share the target length")
        dist, off = pp.nearest(b)
        top_d[i, :dist.size] = dist
        top_j[i, :off.size] = off
        max_lb[i] = pp.max_lb
    dc = centered(d)
    mu, sig = window_stats(dc, length)
    return _LengthState(dc.values, length, mu, sig, top_d, top_j, max_lb, counters)


def exact_motif_at(d: DataSeries, length: int, profiles) -> tuple[MotifEntry, dict]:
    counters = {"profiles_recomputed": 0, "true_distances": 0}
    st = _state_from_profiles(d, length, profiles, 1, counters)
    return st.motif(), counters


def exact_discords_at(d: DataSeries, length: int, profiles, a: int, b: int,
                      exclude_constant: bool = False) -> tuple[dict, dict]:
    """``{m: [(offset, distance), ...]}`` for ``m`` in ``1..b``."""
    if a < 1 or b < 1:
        raise ValueError("a and b must be >= 1")
    counters = {"profiles_recomputed": 0, "true_distances": 0}
    st = _state_from_profiles(d, length, profiles, b, counters)
    keep = st.sig > 0 if exclude_constant else np.ones(st.count, dtype=bool)
    return {m: st.discords(a, m, keep) for m in range(1, b + 1)}, counters


# -- whole range -----------------------------------------------------------

def discover_range(d: DataSeries, min_length: int, max_length: int, a: int = 3, b: int = 3,
                   p: int | None = None, exclude_constant: bool = False,
                   motifs: bool = True) -> Discovery:
    """Motif and Top-``a`` m-th discords (``m <= b``) for every length in the range."""
    if a < 1 or b < 1:
        raise ValueError("a and b must be >= 1")
    if not min_length <= max_length:
        raise ValueError(f"invalid length range [{min_length}, {max_length}]")
    check_length(d, min_length)
    check_length(d, max_length)
    t0 = time.perf_counter()
    dc = centered(d)
    x = dc.values
    n0 = len(d) - min_length + 1
    p = default_candidates(n0, b) if p is None else int(p)
    if p < b:
        raise ValueError(f"p = {p} must be >= b = {b}")
    counters = {
        "base_profiles": n0,
        "profiles_recomputed": 0,
        "true_distances": 0,
        "lb_initializations": 0,
        "lb_evaluations": 0,
        "recomputed_per_length": {},
        "naive_profiles": sum(len(d) - ell + 1 for ell in range(min_length, max_length + 1)),
        "candidates": p,
    }
    mu0, sig0 = window_stats(dc, min_length)
    top_d, top_j, cand, cqt, ncand, kb = _stomp_candidates(x, min_length, mu0, sig0, p, b)
    zone0 = exclusion_zone(min_length)
    rows = np.arange(n0)
    pairs = int((n0 - (np.minimum(rows + zone0, n0 - 1) - np.maximum(rows - zone0, 0) + 1)).sum())
    counters["true_distances"] += pairs
    counters["lb_initializations"] += pairs
    motif_res, grid = MotifResult(), DiscordGrid()
    max_lb = np.full(n0, np.inf)

    def extract(st: _LengthState):
        before = counters["profiles_recomputed"]
        keep = st.sig > 0 if exclude_constant else np.ones(st.count, dtype=bool)
        if motifs:
            motif_res.entries[st.length] = st.motif()
        for m in range(1, b + 1):
            grid.cells[(st.length, m)] = st.discords(a, m, keep)
        counters["recomputed_per_length"][st.length] = counters["profiles_recomputed"] - before

    # the base profiles are complete, so every anchor is exact there
    st = _LengthState(x, min_length, mu0, sig0, top_d, top_j, max_lb, counters)
    st.exact[:] = True
    extract(st)
    for L in range(min_length + 1, max_length + 1):
        mu, sig = window_stats(dc, L)
        n = len(d) - L + 1
        done = _advance(x, L, min_length, mu, sig, sig0, cand, cqt, ncand, kb,
                        top_d, top_j, max_lb)
        counters["true_distances"] += int(done)
        counters["lb_evaluations"] += n
        st = _LengthState(x, L, mu, sig, top_d[:n].copy(), top_j[:n].copy(), max_lb[:n].copy(),
                          counters)
        extract(st)
    counters["full_profiles"] = counters["base_profiles"] + counters["profiles_recomputed"]
    counters["wall_time"] = time.perf_counter() - t0
    params = {"min_length": min_length, "max_length": max_length, "a": a, "b": b, "p": p,
              "exclude_constant": exclude_constant}
    return Discovery(motif_res, grid, counters, params)
