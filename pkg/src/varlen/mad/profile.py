"""Distance profiles and the matrix profile (STOMP row recurrence)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..distance import REFRESH_INTERVAL, _dot_row_direct, _dot_row_next, _znorm_dist
from ..rules import exclusion_zone
from ..series import DataSeries, SubsequenceRef, build_series, window_stats

__all__ = ["DistanceProfile", "MatrixProfile", "distance_profile", "matrix_profile",
           "check_length", "centered"]


def check_length(d: DataSeries, length: int):
    if not 4 <= length <= len(d) // 2:
        raise ValueError(f"length {length} outside [4, {len(d) // 2}] for series of length {len(d)}")


def centered(d: DataSeries) -> DataSeries:
    """Shift by the global mean; z-normalized distances are unchanged, cancellation less so."""
    return build_series(d.values - d.values.mean(), d.id)


@dataclass(frozen=True)
class DistanceProfile:
    anchor: int
    length: int
    offsets: np.ndarray     # admissible offsets only, ascending
    distances: np.ndarray

    @property
    def min(self) -> float:
        return float(self.distances[self.argmin_pos]) if self.distances.size else np.inf

    @property
    def argmin_pos(self) -> int:
        return int(np.argmin(self.distances))

    @property
    def argmin(self) -> int:
        return int(self.offsets[self.argmin_pos]) if self.distances.size else -1

    def nearest(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """The ``m`` smallest distances and their offsets (ties by offset)."""
        order = np.lexsort((self.offsets, self.distances))[:m]
        return self.distances[order], self.offsets[order]


@dataclass(frozen=True)
class MatrixProfile:
    length: int
    distances: np.ndarray
    indices: np.ndarray

    def __len__(self):
        return self.distances.shape[0]

    def motif(self) -> tuple[tuple[int, int], float]:
        i = int(np.argmin(self.distances))
        j = int(self.indices[i])
        return (min(i, j), max(i, j)), float(self.distances[i])


# -- kernels ---------------------------------------------------------------

@njit(cache=True, inline="always")
def _push_sorted(td, tj, d, j):
    """Insert into a row kept sorted by (distance, offset); drops the last slot."""
    b = td.shape[0]
    if not (d < td[b - 1] or (d == td[b - 1] and j < tj[b - 1])):
        return
    pos = b - 1
    while pos > 0 and (d < td[pos - 1] or (d == td[pos - 1] and j < tj[pos - 1])):
        td[pos] = td[pos - 1]
        tj[pos] = tj[pos - 1]
        pos -= 1
    td[pos] = d
    tj[pos] = j


@njit(cache=True, inline="always")
def _sq_from_stats(qt, m, mu_i, sig_i, mu_j, sig_j, inv_j):
    """Squared distance and correlation; ``inv_j`` is ``1 / (m * sig_j)``."""
    if sig_i == 0.0 or sig_j == 0.0:
        if sig_i == 0.0 and sig_j == 0.0:
            return 0.0, 1.0
        return float(m), 0.0
    rho = (qt - m * mu_i * mu_j) / sig_i * inv_j
    if rho > 1.0:
        rho = 1.0
    elif rho < -1.0:
        rho = -1.0
    d2 = 2.0 * m * (1.0 - rho)
    return (d2 if d2 > 0.0 else 0.0), rho


@njit(cache=True)
def _inverse_scale(m, sig):
    inv = np.zeros(sig.shape[0])
    for j in range(sig.shape[0]):
        if sig[j] > 0.0:
            inv[j] = 1.0 / (m * sig[j])
    return inv


@njit(cache=True)
def _stomp(x, m, mu, sig, b):
    """Top-``b`` nearest neighbours of every window, full profiles by recurrence."""
    count = x.shape[0] - m + 1
    zone = m // 2
    inv = _inverse_scale(m, sig)
    top_d = np.full((count, b), np.inf)
    top_j = np.full((count, b), -1, dtype=np.int64)
    qt = _dot_row_direct(x, 0, m)
    since = 0
    for i in range(count):
        if i > 0:
            since += 1
            if since >= REFRESH_INTERVAL:
                qt = _dot_row_direct(x, i, m)
                since = 0
            else:
                qt = _dot_row_next(x, qt, i, m)
        td = top_d[i]
        tj = top_j[i]
        for j in range(count):
            if abs(i - j) <= zone:
                continue
            d2, _ = _sq_from_stats(qt[j], m, mu[i], sig[i], mu[j], sig[j], inv[j])
            # squared values order the same way; roots are taken once at the end
            if d2 <= td[b - 1]:
                _push_sorted(td, tj, d2, j)
    return np.sqrt(top_d), top_j


@njit(cache=True, inline="always")
def _worse(ka, ja, kb, jb):
    return ka < kb or (ka == kb and ja > jb)


@njit(cache=True)
def _sift_down(hk, hj, hq, size, pos):
    while True:
        left = 2 * pos + 1
        if left >= size:
            return
        child = left
        right = left + 1
        if right < size and _worse(hk[right], hj[right], hk[left], hj[left]):
            child = right
        if _worse(hk[child], hj[child], hk[pos], hj[pos]):
            hk[pos], hk[child] = hk[child], hk[pos]
            hj[pos], hj[child] = hj[child], hj[pos]
            hq[pos], hq[child] = hq[child], hq[pos]
            pos = child
        else:
            return


@njit(cache=True)
def _sift_up(hk, hj, hq, pos):
    while pos > 0:
        parent = (pos - 1) // 2
        if _worse(hk[pos], hj[pos], hk[parent], hj[parent]):
            hk[pos], hk[parent] = hk[parent], hk[pos]
            hj[pos], hj[parent] = hj[parent], hj[pos]
            hq[pos], hq[parent] = hq[parent], hq[pos]
            pos = parent
        else:
            return


@njit(cache=True)
def _stomp_candidates(x, m, mu, sig, p, b):
    """STOMP at the base length that also keeps, per anchor, the ``p`` best keys.

    Returns the exact top-``b`` neighbours plus, per anchor, candidate offsets,
    their base-length dot products, the candidate count and the boundary key
    (the worst key kept, or ``-inf`` when nothing was left out).
    """
    count = x.shape[0] - m + 1
    zone = m // 2
    top_d = np.full((count, b), np.inf)
    top_j = np.full((count, b), -1, dtype=np.int64)
    cand = np.full((count, p), -1, dtype=np.int32)
    cqt = np.zeros((count, p))
    ncand = np.zeros(count, dtype=np.int64)
    kb = np.full(count, -np.inf)
    hk = np.empty(p)
    hj = np.empty(p, dtype=np.int64)
    hq = np.empty(p)
    inv = _inverse_scale(m, sig)
    qt = _dot_row_direct(x, 0, m)
    since = 0
    for i in range(count):
        if i > 0:
            since += 1
            if since >= REFRESH_INTERVAL:
                qt = _dot_row_direct(x, i, m)
                since = 0
            else:
                qt = _dot_row_next(x, qt, i, m)
        td = top_d[i]
        tj = top_j[i]
        size = 0
        seen = 0
        for j in range(count):
            if abs(i - j) <= zone:
                continue
            seen += 1
            d2, rho = _sq_from_stats(qt[j], m, mu[i], sig[i], mu[j], sig[j], inv[j])
            if d2 <= td[b - 1]:
                _push_sorted(td, tj, d2, j)
            if sig[j] == 0.0:
                k = np.inf
            elif sig[i] == 0.0 or rho < 0.0:
                k = 0.0
            else:
                k = rho
            if size < p:
                hk[size] = k
                hj[size] = j
                hq[size] = qt[j]
                _sift_up(hk, hj, hq, size)
                size += 1
            elif k > hk[0]:
                # equal keys never displace: offsets arrive in ascending order
                hk[0] = k
                hj[0] = j
                hq[0] = qt[j]
                _sift_down(hk, hj, hq, size, 0)
        for c in range(size):
            cand[i, c] = hj[c]
            cqt[i, c] = hq[c]
        ncand[i] = size
        if seen > size:
            kb[i] = hk[0]
    top_d = np.sqrt(top_d)
    return top_d, top_j, cand, cqt, ncand, kb


# -- public ----------------------------------------------------------------

def distance_profile(d: DataSeries, i: int, length: int) -> DistanceProfile:
    check_length(d, length)
    SubsequenceRef(d.id, i, length).check(d)
    dc = centered(d)
    mu, sig = window_stats(dc, length)
    qt = _dot_row_direct(dc.values, i, length)
    zone = exclusion_zone(length)
    offsets = np.flatnonzero(np.abs(np.arange(qt.shape[0]) - i) > zone)
    dist = np.array([_znorm_dist(qt[j], float(length), mu[i], sig[i], mu[j], sig[j])
                     for j in offsets])
    return DistanceProfile(i, length, offsets, dist)


def matrix_profile(d: DataSeries, length: int) -> MatrixProfile:
    """Nearest-neighbour distance and offset for every window of ``d``."""
    check_length(d, length)
    dc = centered(d)
    mu, sig = window_stats(dc, length)
    top_d, top_j = _stomp(dc.values, int(length), mu, sig, 1)
    return MatrixProfile(length, top_d[:, 0], top_j[:, 0])

