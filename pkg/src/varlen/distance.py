"""Distance kernels shared by the index search, the MAD engine and the oracles.

Candidate-level kernels (``_candidate_sq`` and friends) are the single
arithmetic path for every subsequence distance the library reports, so the
index search and the sequential-scan oracle produce bit-identical values for
the same candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .series import DataSeries, SubsequenceRef, znormalize

__all__ = [
    "DotProductRow",
    "DtwBand",
    "euclidean",
    "znorm_euclidean",
    "znorm_euclidean_from_stats",
    "sliding_dot_products",
    "dtw",
    "dtw_query_envelope",
    "lb_keogh",
    "REFRESH_INTERVAL",
]

# incremental dot-product rows are rebuilt from scratch this often
REFRESH_INTERVAL = 4096

ED = 0
DTW = 1


def metric_code(metric: str) -> int:
    m = metric.lower()
    if m in ("euclidean", "ed"):
        return ED
    if m == "dtw":
        return DTW
    raise ValueError(f"unknown metric {metric!r}; expected 'euclidean' or 'dtw'")


@dataclass(frozen=True)
class DtwBand:
    """Sakoe-Chiba constraint: warping path stays within ``radius`` of the diagonal."""

    radius: int

    @classmethod
    def from_fraction(cls, length: int, fraction: float = 0.05) -> "DtwBand":
        return cls(min(int(math.ceil(fraction * length)), max(length - 1, 0)))

    def check(self, length: int) -> "DtwBand":
        if not 0 <= self.radius < max(length, 1):
            raise ValueError(f"band radius {self.radius} invalid for length {length}")
        return self


@dataclass(frozen=True, eq=False)
class DotProductRow:
    anchor: int
    length: int
    values: np.ndarray
    steps_since_refresh: int = 0


# -- kernels ---------------------------------------------------------------

@njit(cache=True)
def _znorm_dist(qt, m, mu_i, sig_i, mu_j, sig_j):
    if sig_i == 0.0 or sig_j == 0.0:
        # all-zeros rule: zero vs zero is 0, zero vs unit-variance is sqrt(m)
        if sig_i == 0.0 and sig_j == 0.0:
            return 0.0
        return np.sqrt(m)
    rho = (qt - m * mu_i * mu_j) / (m * sig_i * sig_j)
    if rho > 1.0:
        rho = 1.0
    elif rho < -1.0:
        rho = -1.0
    d2 = 2.0 * m * (1.0 - rho)
    return np.sqrt(d2) if d2 > 0.0 else 0.0


@njit(cache=True)
def _dot_row_direct(x, i, m):
    count = x.shape[0] - m + 1
    out = np.empty(count)
    for j in range(count):
        acc = 0.0
        for t in range(m):
            acc += x[i + t] * x[j + t]
        out[j] = acc
    return out


@njit(cache=True)
def _dot_row_next(x, prev, i, m):
    """Row for anchor ``i`` from the row for ``i - 1``."""
    count = prev.shape[0]
    out = np.empty(count)
    acc = 0.0
    for t in range(m):
        acc += x[i + t] * x[t]
    out[0] = acc
    drop = x[i - 1]
    add = x[i + m - 1]
    for j in range(1, count):
        out[j] = prev[j - 1] - drop * x[j - 1] + add * x[j + m - 1]
    return out


@njit(cache=True)
def _dtw_sq(x, y, r, prev, cur):
    m = x.shape[0]
    for j in range(m + 1):
        prev[j] = np.inf
        cur[j] = np.inf
    prev[0] = 0.0
    for i in range(1, m + 1):
        lo = max(1, i - r)
        hi = min(m, i + r)
        cur[lo - 1] = np.inf
        xi = x[i - 1]
        for j in range(lo, hi + 1):
            diff = xi - y[j - 1]
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = diff * diff + best
        if hi < m:
            cur[hi + 1] = np.inf
        tmp = prev
        prev = cur
        cur = tmp
    return prev[m]


@njit(cache=True)
def _ed_sq(x, y):
    acc = 0.0
    for t in range(x.shape[0]):
        diff = x[t] - y[t]
        acc += diff * diff
    return acc


@njit(cache=True)
def _lb_keogh_sq(c, lower, upper):
    acc = 0.0
    for t in range(c.shape[0]):
        v = c[t]
        if v > upper[t]:
            diff = v - upper[t]
            acc += diff * diff
        elif v < lower[t]:
            diff = lower[t] - v
            acc += diff * diff
    return acc


@njit(cache=True)
def _load_candidate(buf, pos, m, mu, sig, znorm, out):
    if znorm:
        if sig == 0.0:
            for t in range(m):
                out[t] = 0.0
        else:
            for t in range(m):
                out[t] = (buf[pos + t] - mu) / sig
    else:
        for t in range(m):
            out[t] = buf[pos + t]


@njit(cache=True)
def _candidate_sq(q, cand, kind, r, prev, cur):
    if kind == 1:
        return _dtw_sq(q, cand, r, prev, cur)
    return _ed_sq(q, cand)


# -- public operations -----------------------------------------------------

def _pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape or x.size == 0:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    return x, y


def euclidean(x, y) -> float:
    x, y = _pair(x, y)
    return float(np.sqrt(_ed_sq(x, y)))


def znorm_euclidean(x, y) -> float:
    """Euclidean distance between explicitly z-normalized copies of ``x`` and ``y``.

    Slower than the statistics form but free of its cancellation near zero.
    """
    x, y = _pair(x, y)
    return euclidean(znormalize(x), znormalize(y))


def znorm_euclidean_from_stats(qt, length, mu_i, sigma_i, mu_j, sigma_j) -> float:
    """z-normalized Euclidean distance from a dot product and window moments."""
    if length < 1:
        raise ValueError("length must be >= 1")
    return float(_znorm_dist(float(qt), float(length), float(mu_i), float(sigma_i),
                             float(mu_j), float(sigma_j)))


def sliding_dot_products(d: DataSeries, i: int, length: int,
                         previous: DotProductRow | None = None) -> DotProductRow:
    """Dot products of window ``i`` with every window of the same length.

    Given the row for anchor ``i - 1`` the update is O(|D|); every
    ``REFRESH_INTERVAL`` steps the row is rebuilt directly to bound drift.
    """
    SubsequenceRef(d.id, i, length).check(d)
    x = d.values
    if previous is not None:
        if previous.anchor != i - 1 or previous.length != length:
            raise ValueError("previous row must belong to anchor i-1 at the same length")
        steps = previous.steps_since_refresh + 1
        if steps < REFRESH_INTERVAL:
            return DotProductRow(i, length, _dot_row_next(x, previous.values, i, length), steps)
    return DotProductRow(i, length, _dot_row_direct(x, i, length), 0)


def dtw(x, y, band: DtwBand | int | None = None) -> float:
    """Band-constrained DTW: square root of the cumulative squared cost."""
    x, y = _pair(x, y)
    if band is None:
        band = DtwBand.from_fraction(x.shape[0])
    elif not isinstance(band, DtwBand):
        band = DtwBand(int(band))
    band.check(x.shape[0])
    m = x.shape[0]
    return float(np.sqrt(_dtw_sq(x, y, band.radius, np.empty(m + 1), np.empty(m + 1))))


def dtw_query_envelope(q, band: DtwBand | int) -> tuple[np.ndarray, np.ndarray]:
    """Running min/max of ``q`` over ``[t - r, t + r]`` clipped to the bounds."""
    q = np.asarray(q, dtype=np.float64)
    r = band.radius if isinstance(band, DtwBand) else int(band)
    size = 2 * r + 1
    # nearest-edge padding is equivalent to clipping for running extrema
    lower = minimum_filter1d(q, size, mode="nearest")
    upper = maximum_filter1d(q, size, mode="nearest")
    return lower, upper


def lb_keogh(c, lower, upper) -> float:
    c = np.asarray(c, dtype=np.float64)
    return float(np.sqrt(_lb_keogh_sq(c, np.asarray(lower, dtype=np.float64),
                                      np.asarray(upper, dtype=np.float64))))

