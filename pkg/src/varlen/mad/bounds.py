"""Length-extensible lower bound on the z-normalized distance.

For an anchor ``i`` at full target length ``L = l + k`` and a candidate ``j``
known only through its first ``l`` points, the bound is the smallest distance
achievable by any real tail of ``k`` points appended to the candidate.  With

    rho = corr(A[:l], C[:l]),  r = std(A[:l]) / std(A),  q = max(rho, 0)
    x = (l / L) * r**2 * (1 - q**2)

the best attainable correlation is ``sqrt(1 - x)`` so the bound is
``sqrt(2 L (1 - sqrt(1 - x)))``.  For a fixed anchor and length everything
but ``q`` is shared by the whole profile and the bound falls as ``q`` grows,
so one ordering by ``q`` (ties by offset) serves every target length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..distance import _znorm_dist
from ..rules import is_trivial
from ..series import DataSeries, SubsequenceRef, subseq_stats

__all__ = ["LowerBoundEntry", "LowerBoundState", "lb_init", "lb_eval", "lb_from_keys"]


@njit(cache=True, inline="always")
def _key(qt, m, mu_i, sig_i, mu_j, sig_j):
    """Per-pair ordering key: larger means a smaller bound at every length."""
    if sig_j == 0.0:
        # a flat head plus a free tail can match anything the anchor's shape allows
        return np.inf
    if sig_i == 0.0:
        return 0.0
    rho = (qt - m * mu_i * mu_j) / (m * sig_i * sig_j)
    if rho > 1.0:
        return 1.0
    return rho if rho > 0.0 else 0.0


@njit(cache=True, inline="always")
def _lb_from_key(q, target, base, sig_head, sig_full):
    if q == np.inf:
        return 0.0
    if q == -np.inf:
        # sentinel for "no excluded candidates": nothing outside can be closer
        return np.inf
    if sig_full == 0.0:
        return np.sqrt(target)
    r = sig_head / sig_full
    x = (base / target) * r * r * (1.0 - q * q)
    if x > 1.0:
        x = 1.0
    if x <= 0.0:
        return 0.0
    return np.sqrt(2.0 * target * x / (1.0 + np.sqrt(1.0 - x)))


@njit(cache=True)
def _lb_vector(keys, target, base, sig_head, sig_full):
    out = np.empty(keys.shape[0])
    for c in range(keys.shape[0]):
        out[c] = _lb_from_key(keys[c], target, base, sig_head, sig_full)
    return out


def lb_from_keys(keys, target: int, base: int, sig_head: float, sig_full: float) -> np.ndarray:
    """Vectorized bound for one anchor over many candidate keys."""
    return _lb_vector(np.asarray(keys, dtype=np.float64), float(target), float(base),
                      float(sig_head), float(sig_full))


@dataclass(frozen=True)
class LowerBoundEntry:
    """Cached base-length quantities for one (anchor, candidate) pair."""

    anchor: int
    candidate: int
    base_length: int
    dot: float
    mean_i: float
    std_i: float
    mean_j: float
    std_j: float

    @property
    def key(self) -> float:
        return float(_key(self.dot, float(self.base_length), self.mean_i, self.std_i,
                          self.mean_j, self.std_j))

    @property
    def base_distance(self) -> float:
        return float(_znorm_dist(self.dot, float(self.base_length), self.mean_i, self.std_i,
                                 self.mean_j, self.std_j))


def lb_init(d: DataSeries, i: int, j: int, base_length: int) -> LowerBoundEntry | None:
    """Cache the pair's base-length dot product and moments; ``None`` for trivial pairs."""
    SubsequenceRef(d.id, i, base_length).check(d)
    SubsequenceRef(d.id, j, base_length).check(d)
    if is_trivial(i, j, base_length):
        return None
    x = d.values
    dot = float(np.dot(x[i:i + base_length], x[j:j + base_length]))
    mu_i, sd_i = subseq_stats(d, i, base_length)
    mu_j, sd_j = subseq_stats(d, j, base_length)
    return LowerBoundEntry(i, j, base_length, dot, mu_i, sd_i, mu_j, sd_j)


def lb_eval(entry: LowerBoundEntry, d: DataSeries, target: int) -> float:
    """Bound on ``dist(D[i:i+target], D[j:j+target])`` in O(1)."""
    base = entry.base_length
    if target < base:
        raise ValueError(f"target length {target} below base length {base}")
    if entry.anchor + target > len(d) or entry.candidate + target > len(d):
        raise ValueError(f"target length {target} runs past the end of the series")
    if target == base:
        return entry.base_distance
    _, sd_full = subseq_stats(d, entry.anchor, target)
    return float(_lb_from_key(entry.key, float(target), float(base), entry.std_i, sd_full))


class LowerBoundState:
    """Bounds for many pairs of one series, keyed by anchor."""

    def __init__(self, d: DataSeries, base_length: int):
        self.d = d
        self.base_length = int(base_length)
        self.entries: dict[tuple[int, int], LowerBoundEntry] = {}
        self.target = self.base_length

    def add(self, i: int, j: int) -> LowerBoundEntry | None:
        e = lb_init(self.d, i, j, self.base_length)
        if e is not None:
            self.entries[(i, j)] = e
        return e

    def set_target(self, target: int):
        if target < self.base_length:
            raise ValueError("target below base length")
        self.target = int(target)

    def bounds(self, i: int, candidates) -> np.ndarray:
        """Bounds at the current target for anchor ``i``'s cached candidates."""
        ents = [self.entries[(i, int(j))] for j in candidates]
        if self.target == self.base_length:
            return np.array([e.base_distance for e in ents])
        _, sd_full = subseq_stats(self.d, i, self.target)
        keys = np.array([e.key for e in ents])
        return lb_from_keys(keys, self.target, self.base_length, ents[0].std_i if ents else 0.0,
                            sd_full)
