"""Conventions shared by the engines and the brute-force oracles.

Keeping these in one place means an engine/oracle diff exercises the
algorithms, never a disagreement about what counts as a trivial match or
which of two equal distances wins.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "exclusion_zone",
    "is_trivial",
    "rank_order",
    "select_non_overlapping",
    "admissible_pair_count",
]


def exclusion_zone(length: int) -> int:
    """Offsets with ``|i - j| <= exclusion_zone(length)`` are trivial matches."""
    return int(length) // 2


def is_trivial(i: int, j: int, length: int) -> bool:
    return abs(int(i) - int(j)) <= exclusion_zone(length)


def rank_order(distances, offsets, series_ids=None, descending=False) -> np.ndarray:
    """Indices sorting candidates by distance, then series id, then offset.

    With ``descending=True`` the distance key is reversed but the id/offset
    tie-breakers still favour the smaller value.
    """
    distances = np.asarray(distances, dtype=np.float64)
    offsets = np.asarray(offsets)
    key = -distances if descending else distances
    if series_ids is None:
        return np.lexsort((offsets, key))
    return np.lexsort((offsets, np.asarray(series_ids), key))


def select_non_overlapping(values, offsets, count: int, length: int) -> list[int]:
    """Greedy top-``count`` selection by descending value, skipping trivial overlaps.

    Returns positions into ``values``.  Non-finite values never qualify.
    """
    values = np.asarray(values, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.int64)
    zone = exclusion_zone(length)
    picked: list[int] = []
    for pos in rank_order(values, offsets, descending=True):
        if not np.isfinite(values[pos]):
            continue
        off = offsets[pos]
        if any(abs(off - offsets[q]) <= zone for q in picked):
            continue
        picked.append(int(pos))
        if len(picked) == count:
            break
    return picked


def admissible_pair_count(n_subsequences: int, length: int) -> int:
    """Number of ordered (anchor, candidate) pairs outside the exclusion zone."""
    n = int(n_subsequences)
    z = min(exclusion_zone(length), n - 1)
    # each anchor loses itself plus up to z neighbours on each side
    inside = n + 2 * (z * n - z * (z + 1) // 2)
    return n * n - inside
