"""Data series, subsequence statistics, z-normalization, PAA and iSAX."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import ndtri

__all__ = [
    "DataSeries",
    "SubsequenceRef",
    "PaaVector",
    "SaxWord",
    "Breakpoints",
    "build_series",
    "subseq_stats",
    "window_stats",
    "znormalize",
    "paa",
    "gaussian_breakpoints",
    "isax_from_paa",
]

_ids = itertools.count()


# -- double-double helpers -------------------------------------------------
# Prefix sums over a long random walk grow to ~1e12; differencing two of them
# in plain float64 leaves only a few correct digits of a short window's
# variance.  Carrying a second word of precision keeps window moments exact
# to ~1e-16 relative regardless of series length.

@njit(cache=True, inline="always")
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@njit(cache=True, inline="always")
def _fast_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


@njit(cache=True, inline="always")
def _two_prod(a, b):
    p = a * b
    c = 134217729.0 * a
    ah = c - (c - a)
    al = a - ah
    c = 134217729.0 * b
    bh = c - (c - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(cache=True, inline="always")
def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    e += al + bl
    return _fast_two_sum(s, e)


@njit(cache=True, inline="always")
def _dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    e += ah * bl + al * bh
    return _fast_two_sum(p, e)


@njit(cache=True, inline="always")
def _dd_div(ah, al, b):
    q1 = ah / b
    p, e = _two_prod(q1, b)
    r = ((ah - p) - e + al) / b
    return _fast_two_sum(q1, r)


@njit(cache=True)
def _prefix_sums(x):
    n = x.shape[0]
    s_hi = np.zeros(n + 1)
    s_lo = np.zeros(n + 1)
    q_hi = np.zeros(n + 1)
    q_lo = np.zeros(n + 1)
    run = np.ones(n + 1, dtype=np.int64)
    run[n] = 0
    for i in range(n - 2, -1, -1):
        if x[i] == x[i + 1]:
            run[i] = run[i + 1] + 1
    sh = 0.0
    sl = 0.0
    qh = 0.0
    ql = 0.0
    for i in range(n):
        v = x[i]
        sh, sl = _dd_add(sh, sl, v, 0.0)
        ph, pl = _two_prod(v, v)
        qh, ql = _dd_add(qh, ql, ph, pl)
        s_hi[i + 1] = sh
        s_lo[i + 1] = sl
        q_hi[i + 1] = qh
        q_lo[i + 1] = ql
    return s_hi, s_lo, q_hi, q_lo, run


@njit(cache=True, inline="always")
def _moments(s_hi, s_lo, q_hi, q_lo, run, a, m):
    b = a + m
    sh, sl = _dd_add(s_hi[b], s_lo[b], -s_hi[a], -s_lo[a])
    qh, ql = _dd_add(q_hi[b], q_lo[b], -q_hi[a], -q_lo[a])
    mean = (sh + sl) / m
    th, tl = _dd_mul(sh, sl, sh, sl)
    th, tl = _dd_div(th, tl, float(m))
    mh, ml = _dd_add(qh, ql, -th, -tl)
    var = (mh + ml) / m
    # a window inside one run of equal values is exactly flat
    if var < 0.0 or run[a] >= m:
        var = 0.0
    return mean, np.sqrt(var)


@njit(cache=True)
def _all_moments(s_hi, s_lo, q_hi, q_lo, run, m):
    n = s_hi.shape[0] - 1
    count = n - m + 1
    means = np.empty(count)
    stds = np.empty(count)
    for a in range(count):
        means[a], stds[a] = _moments(s_hi, s_lo, q_hi, q_lo, run, a, m)
    return means, stds


@njit(cache=True)
def _segment_means(x, s):
    """Mean of ``x[p:p+s]`` for every start ``p``, summed left to right."""
    count = x.shape[0] - s + 1
    out = np.empty(max(count, 0))
    for p in range(count):
        acc = 0.0
        for t in range(s):
            acc += x[p + t]
        out[p] = acc / s
    return out


@njit(cache=True)
def _paa_kernel(x, s):
    w = x.shape[0] // s
    out = np.empty(w)
    for k in range(w):
        acc = 0.0
        for t in range(s):
            acc += x[k * s + t]
        out[k] = acc / s
    return out


# -- types -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DataSeries:
    """An immutable series with prefix sums for O(1) subsequence moments.

    ``prefix_sum`` and ``prefix_sum_sq`` hold the leading word of the
    cumulative sums; a trailing correction word is kept privately.
    """

    values: np.ndarray
    id: int = field(default_factory=lambda: next(_ids))
    _prefix: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if self._prefix is None:
            object.__setattr__(self, "_prefix", _prefix_sums(self.values))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def prefix_sum(self) -> np.ndarray:
        return self._prefix[0] + self._prefix[1]

    @property
    def prefix_sum_sq(self) -> np.ndarray:
        return self._prefix[2] + self._prefix[3]

    def stats(self, offset: int, length: int) -> tuple[float, float]:
        return subseq_stats(self, offset, length)

    def window_stats(self, length: int) -> tuple[np.ndarray, np.ndarray]:
        return window_stats(self, length)

    def subsequence(self, offset: int, length: int) -> np.ndarray:
        SubsequenceRef(self.id, offset, length).check(self)
        return self.values[offset:offset + length]


@dataclass(frozen=True, order=True)
class SubsequenceRef:
    """``length`` points of series ``series_id`` starting at 0-based ``offset``."""

    series_id: int
    offset: int
    length: int

    def check(self, series: DataSeries) -> "SubsequenceRef":
        if self.offset < 0 or self.length < 1 or self.offset + self.length > len(series):
            raise IndexError(
                f"subsequence (offset={self.offset}, length={self.length}) "
                f"out of range for series of length {len(series)}"
            )
        return self


@dataclass(frozen=True, eq=False)
class PaaVector:
    coefficients: np.ndarray
    segment_length: int

    def __len__(self) -> int:
        return self.coefficients.shape[0]

    def prefix(self, k: int) -> "PaaVector":
        """The first ``k`` dimensions."""
        return PaaVector(self.coefficients[:k], self.segment_length)


@dataclass(frozen=True, eq=False)
class SaxWord:
    symbols: np.ndarray
    alphabet_size: int

    def labels(self) -> list[str]:
        bits = int(np.log2(self.alphabet_size))
        return [format(int(s), f"0{bits}b") for s in self.symbols]


@dataclass(frozen=True, eq=False)
class Breakpoints:
    """Ascending thresholds splitting the real line into equal-mass regions."""

    thresholds: np.ndarray

    @property
    def alphabet_size(self) -> int:
        return self.thresholds.shape[0] + 1

    @property
    def bits(self) -> int:
        return int(self.alphabet_size).bit_length() - 1

    def symbols(self, values) -> np.ndarray:
        # a value sitting exactly on a threshold belongs to the upper region
        return np.searchsorted(self.thresholds, np.asarray(values, dtype=np.float64), side="right")

    def lower(self, symbols) -> np.ndarray:
        """Region lower bounds; symbol ``-1`` (undefined) maps to ``+inf``."""
        symbols = np.asarray(symbols, dtype=np.int64)
        edges = np.concatenate(([-np.inf], self.thresholds, [np.inf]))
        out = edges[np.clip(symbols, 0, None)]
        return np.where(symbols < 0, np.inf, out)

    def upper(self, symbols) -> np.ndarray:
        """Region upper bounds; symbol ``-1`` (undefined) maps to ``-inf``."""
        symbols = np.asarray(symbols, dtype=np.int64)
        edges = np.concatenate((self.thresholds, [np.inf]))
        out = edges[np.clip(symbols, 0, None)]
        return np.where(symbols < 0, -np.inf, out)

    def region(self, symbol: int) -> tuple[float, float]:
        return float(self.lower([symbol])[0]), float(self.upper([symbol])[0])


# -- operations ------------------------------------------------------------

def build_series(values, id: int | None = None) -> DataSeries:
    """Validate ``values`` and wrap them with precomputed prefix sums."""
    arr = np.array(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("empty series")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise ValueError(f"non-finite value at position {int(bad[0])}")
    arr.setflags(write=False)
    if id is None:
        return DataSeries(arr)
    return DataSeries(arr, int(id))


def subseq_stats(d: DataSeries, s: int, length: int) -> tuple[float, float]:
    """Population mean and standard deviation of ``d[s:s+length]`` in O(1)."""
    SubsequenceRef(d.id, s, length).check(d)
    mean, std = _moments(*d._prefix, int(s), int(length))
    return float(mean), float(std)


def window_stats(d: DataSeries, length: int) -> tuple[np.ndarray, np.ndarray]:
    """Means and stds of every length-``length`` window, indexed by offset."""
    if not 1 <= length <= len(d):
        raise IndexError(f"window length {length} out of range for series of length {len(d)}")
    return _all_moments(*d._prefix, int(length))


def znormalize(x) -> np.ndarray:
    """Shift/scale to mean 0 and std 1; a constant input maps to all zeros."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty sequence")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite value in sequence")
    # test flatness exactly; a rounded std of a constant run need not be 0
    if np.ptp(x) == 0.0:
        return np.zeros_like(x)
    return (x - x.mean()) / x.std()


def paa(x, segment_length: int) -> PaaVector:
    """Segment means over the longest prefix that is a multiple of ``segment_length``."""
    x = np.asarray(x, dtype=np.float64)
    if segment_length < 1:
        raise ValueError("segment length must be >= 1")
    if x.shape[0] < segment_length:
        raise ValueError("sequence shorter than one segment")
    return PaaVector(_paa_kernel(x, int(segment_length)), int(segment_length))


def gaussian_breakpoints(alphabet_size: int) -> Breakpoints:
    """Standard-normal quantiles at ``i / alphabet_size``."""
    a = int(alphabet_size)
    if a < 2 or a & (a - 1):
        raise ValueError(f"alphabet size must be a power of two >= 2, got {alphabet_size}")
    thresholds = ndtri(np.arange(1, a) / a)
    # ndtri(0.5) is exactly 0; enforce symmetry bit-for-bit
    thresholds = (thresholds - thresholds[::-1]) / 2.0
    return Breakpoints(thresholds)


def isax_from_paa(p: PaaVector, bp: Breakpoints) -> SaxWord:
    return SaxWord(bp.symbols(p.coefficients), bp.alphabet_size)
