"""scikit-learn front ends for discovery and matrix-profile features."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..results import discovery_rows
from ..series import DataSeries, build_series
from .engine import discover_range
from .profile import matrix_profile


def _as_series(X) -> DataSeries:
    if isinstance(X, DataSeries):
        return X
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise ValueError(f"expected a single series, got shape {arr.shape}")
    return build_series(arr, 0)


class VariableLengthMiner(BaseEstimator):
    """Exact motifs and Top-``n_discords`` m-th discords for every length in a range.

    Parameters
    ----------
    min_length, max_length : int
        Inclusive subsequence length range.
    n_discords : int
        Discords reported per (length, m) cell.
    max_neighbor : int
        Largest neighbour rank ``m``.
    n_candidates : int or None
        Partial-profile size ``p``; ``None`` picks ``max(16, ceil(5% of windows))``.
    exclude_constant : bool
        Leave flat windows out of discord ranking.

    Attributes
    ----------
    motifs_ : MotifResult
    discords_ : DiscordGrid
    counters_ : dict
    """

    def __init__(self, min_length=64, max_length=96, n_discords=3, max_neighbor=3,
                 n_candidates=None, exclude_constant=False):
        self.min_length = min_length
        self.max_length = max_length
        self.n_discords = n_discords
        self.max_neighbor = max_neighbor
        self.n_candidates = n_candidates
        self.exclude_constant = exclude_constant

    def fit(self, X, y=None):
        d = _as_series(X)
        res = discover_range(d, self.min_length, self.max_length, self.n_discords,
                             self.max_neighbor, self.n_candidates, self.exclude_constant)
        self.motifs_ = res.motifs
        self.discords_ = res.discords
        self.counters_ = res.counters
        self.n_candidates_ = res.params["p"]
        return self

    def results(self) -> list[dict]:
        check_is_fitted(self, "motifs_")
        return discovery_rows(self.motifs_, self.discords_)

    def best_motif(self):
        check_is_fitted(self, "motifs_")
        return self.motifs_.best()


class MatrixProfileTransformer(TransformerMixin, BaseEstimator):
    """Maps each row of ``X`` (one series per row) to its matrix profile at ``window``.

    Output rows are padded with NaN to width ``n_features - window + 1``.
    """

    def __init__(self, window=64):
        self.window = window

    def fit(self, X, y=None):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        out = np.full((X.shape[0], X.shape[1] - self.window + 1), np.nan)
        for r, row in enumerate(X):
            out[r] = matrix_profile(build_series(row, r), self.window).distances
        return out
