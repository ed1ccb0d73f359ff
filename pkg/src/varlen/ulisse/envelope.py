"""Master series, PAA envelopes and their iSAX form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..series import (
    Breakpoints,
    DataSeries,
    PaaVector,
    SaxWord,
    SubsequenceRef,
    _moments,
    _segment_means,
)

__all__ = [
    "MasterSeries",
    "PaaEnvelope",
    "UEnvelope",
    "enumerate_master_series",
    "build_paa_envelope",
    "envelope_to_uenv",
    "envelope_count",
]


@dataclass(frozen=True)
class MasterSeries:
    """The longest (capped at ``max_length``) subsequence starting at ``ref.offset``."""

    ref: SubsequenceRef

    @property
    def offset(self) -> int:
        return self.ref.offset

    @property
    def length(self) -> int:
        return self.ref.length


@dataclass(frozen=True, eq=False)
class PaaEnvelope:
    """Per-segment [L, U] bounds over the PAA of a run of master series.

    Segments no member reaches are undefined: ``L = +inf`` and ``U = -inf``.
    Master-series offsets covered are ``range(start, stop)``.
    """

    lower: PaaVector
    upper: PaaVector
    series_id: int
    start: int
    stop: int
    min_length: int
    max_length: int
    gamma: int
    normalized: bool

    @property
    def n_segments(self) -> int:
        """Number of leading segments defined for at least one member."""
        return int(np.count_nonzero(np.isfinite(self.lower.coefficients)))


@dataclass(frozen=True, eq=False)
class UEnvelope:
    isax_lower: SaxWord
    isax_upper: SaxWord
    series_id: int
    start: int
    stop: int
    n_segments: int

    def region_bounds(self, bp: Breakpoints) -> tuple[np.ndarray, np.ndarray]:
        return bp.lower(self.isax_lower.symbols), bp.upper(self.isax_upper.symbols)


def _check_range(n, min_length, max_length):
    if not 1 <= min_length <= max_length <= n:
        raise ValueError(
            f"invalid length range [{min_length}, {max_length}] for series of length {n}"
        )


def enumerate_master_series(d: DataSeries, min_length: int, max_length: int) -> list[MasterSeries]:
    n = len(d)
    _check_range(n, min_length, max_length)
    return [
        MasterSeries(SubsequenceRef(d.id, i, min(n - i, max_length)))
        for i in range(n - min_length + 1)
    ]


def envelope_count(n: int, min_length: int, gamma: int) -> int:
    return -(-(n - min_length + 1) // (gamma + 1))


# -- kernels ---------------------------------------------------------------

@njit(cache=True)
def _envelopes_raw(n, seg_means, min_length, max_length, s, w, gamma):
    count = n - min_length + 1
    group = gamma + 1
    n_env = (count + group - 1) // group
    lower = np.full((n_env, w), np.inf)
    upper = np.full((n_env, w), -np.inf)
    for e in range(n_env):
        for o in range(e * group, min((e + 1) * group, count)):
            # prefixes of the master series cover every shorter subsequence
            segs = min(n - o, max_length) // s
            for k in range(segs):
                v = seg_means[o + k * s]
                if v < lower[e, k]:
                    lower[e, k] = v
                if v > upper[e, k]:
                    upper[e, k] = v
    return lower, upper


@njit(cache=True)
def _envelopes_znorm(n, seg_means, s_hi, s_lo, q_hi, q_lo, run, min_length, max_length, s, w, gamma):
    count = n - min_length + 1
    group = gamma + 1
    n_env = (count + group - 1) // group
    lower = np.full((n_env, w), np.inf)
    upper = np.full((n_env, w), -np.inf)
    for e in range(n_env):
        for o in range(e * group, min((e + 1) * group, count)):
            top = min(n - o, max_length)
            for m in range(min_length, top + 1):
                segs = m // s
                if segs == 0:
                    continue
                mu, sig = _moments(s_hi, s_lo, q_hi, q_lo, run, o, m)
                for k in range(segs):
                    if sig == 0.0:
                        v = 0.0
                    else:
                        v = (seg_means[o + k * s] - mu) / sig
                    if v < lower[e, k]:
                        lower[e, k] = v
                    if v > upper[e, k]:
                        upper[e, k] = v
    return lower, upper


def series_envelopes(d: DataSeries, min_length: int, max_length: int, s: int,
                     gamma: int, normalized: bool) -> tuple[np.ndarray, np.ndarray]:
    """L and U arrays (one row per envelope) for all master-series runs of ``d``."""
    n = len(d)
    _check_range(n, min_length, max_length)
    w = max_length // s
    seg_means = _segment_means(d.values, s)
    if normalized:
        return _envelopes_znorm(n, seg_means, *d._prefix, min_length, max_length, s, w, gamma)
    return _envelopes_raw(n, seg_means, min_length, max_length, s, w, gamma)


def build_paa_envelope(d: DataSeries, group: list[MasterSeries], segment_length: int,
                       normalized: bool = False, min_length: int | None = None,
                       max_length: int | None = None) -> PaaEnvelope:
    """Envelope of one run of consecutive master series of ``d``.

    ``min_length``/``max_length`` default to the shortest and longest member;
    pass the index range explicitly when members near the series end are
    shorter than ``max_length``.
    """
    if not group:
        raise ValueError("empty group")
    offsets = [ms.offset for ms in group]
    if offsets != list(range(offsets[0], offsets[0] + len(offsets))):
        raise ValueError("master series in a group must be consecutive")
    lmin = min_length if min_length is not None else min(ms.length for ms in group)
    lmax = max_length if max_length is not None else max(ms.length for ms in group)
    n = len(d)
    s = int(segment_length)
    w = lmax // s
    start = offsets[0]
    # run the series-wide kernel on a window so that group ends at the last offset
    seg_means = _segment_means(d.values, s)
    sub_n = n - start
    shifted = seg_means[start:]
    if normalized:
        sub = DataSeries(d.values[start:], d.id)
        lower, upper = _envelopes_znorm(sub_n, shifted, *sub._prefix, lmin, lmax, s, w,
                                        len(group) - 1)
    else:
        lower, upper = _envelopes_raw(sub_n, shifted, lmin, lmax, s, w, len(group) - 1)
    return PaaEnvelope(
        lower=PaaVector(lower[0], s),
        upper=PaaVector(upper[0], s),
        series_id=d.id,
        start=start,
        stop=start + len(group),
        min_length=lmin,
        max_length=lmax,
        gamma=len(group) - 1,
        normalized=normalized,
    )


def to_symbols(values: np.ndarray, bp: Breakpoints) -> np.ndarray:
    """iSAX symbols with ``-1`` marking undefined (non-finite) coefficients."""
    sym = bp.symbols(values).astype(np.int64)
    sym[~np.isfinite(values)] = -1
    return sym


def envelope_to_uenv(e: PaaEnvelope, bp: Breakpoints) -> UEnvelope:
    return UEnvelope(
        isax_lower=SaxWord(to_symbols(e.lower.coefficients, bp), bp.alphabet_size),
        isax_upper=SaxWord(to_symbols(e.upper.coefficients, bp), bp.alphabet_size),
        series_id=e.series_id,
        start=e.start,
        stop=e.stop,
        n_segments=e.n_segments,
    )
