"""``UlisseIndex``: variable-length subsequence k-NN as a scikit-learn estimator."""

from __future__ import annotations

import time

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..distance import metric_code
from ..series import DataSeries, build_series, gaussian_breakpoints, window_stats
from .envelope import UEnvelope, envelope_count, series_envelopes, to_symbols
from .search import QueryResult, search
from .tree import EnvelopeStore, EnvelopeTree


def as_collection(X) -> list[DataSeries]:
    """Accept a DataSeries, a 1-D array, a 2-D array (rows) or a list of either."""
    if isinstance(X, DataSeries):
        return [X]
    if isinstance(X, np.ndarray):
        if X.ndim == 1:
            return [build_series(X, 0)]
        if X.ndim == 2:
            return [build_series(row, i) for i, row in enumerate(X)]
        raise ValueError(f"expected a 1-D or 2-D array, got shape {X.shape}")
    items = list(X)
    if not items:
        raise ValueError("empty collection")
    if all(np.isscalar(v) for v in items):
        return [build_series(items, 0)]
    out = []
    for i, item in enumerate(items):
        out.append(item if isinstance(item, DataSeries) else build_series(item, i))
    return out


class UlisseIndex(BaseEstimator):
    """Envelope index answering k-NN queries of any length in ``[min_length, max_length]``.

    Parameters
    ----------
    min_length, max_length : int
        Query length range supported by the index.
    segment_length : int
        Points per PAA segment.
    alphabet_size : int
        iSAX cardinality (power of two).
    gamma : int or None
        Extra consecutive master series folded into one envelope; ``None``
        means ``max_length - min_length``.
    normalize : bool
        Index z-normalized subsequences instead of raw values.
    leaf_capacity : int
        Envelopes per leaf before a split is attempted.
    metric : {"euclidean", "dtw"}
        Default distance for queries; can be overridden per query.
    dtw_radius : float
        Sakoe-Chiba radius as a fraction of the query length.
    """

    def __init__(self, min_length=128, max_length=256, segment_length=16, alphabet_size=256,
                 gamma=None, normalize=False, leaf_capacity=100, metric="euclidean",
                 dtw_radius=0.05):
        self.min_length = min_length
        self.max_length = max_length
        self.segment_length = segment_length
        self.alphabet_size = alphabet_size
        self.gamma = gamma
        self.normalize = normalize
        self.leaf_capacity = leaf_capacity
        self.metric = metric
        self.dtw_radius = dtw_radius

    # -- construction ------------------------------------------------------

    @property
    def gamma_(self) -> int:
        return self.max_length - self.min_length if self.gamma is None else int(self.gamma)

    def _validate_params(self):
        if not 1 <= self.min_length <= self.max_length:
            raise ValueError(f"invalid length range [{self.min_length}, {self.max_length}]")
        if self.segment_length < 1 or self.segment_length > self.max_length:
            raise ValueError("segment_length must lie in [1, max_length]")
        if self.gamma_ < 0:
            raise ValueError("gamma must be >= 0")
        metric_code(self.metric)

    def fit(self, X, y=None):
        self._validate_params()
        t0 = time.perf_counter()
        series = as_collection(X)
        ids = [d.id for d in series]
        if len(set(ids)) != len(ids):
            raise ValueError("series ids must be unique within a collection")
        for d in series:
            if len(d) < self.max_length:
                raise ValueError(
                    f"series {d.id} has length {len(d)} < max_length {self.max_length}")
        self.breakpoints_ = gaussian_breakpoints(self.alphabet_size)
        self._attach(series)
        w = self.max_length // self.segment_length
        self.store_ = EnvelopeStore(w)
        self.tree_ = EnvelopeTree(self.store_, self.breakpoints_, self.leaf_capacity)
        group = self.gamma_ + 1
        for pos, d in enumerate(series):
            lower, upper = series_envelopes(d, self.min_length, self.max_length,
                                            self.segment_length, self.gamma_, self.normalize)
            count = len(d) - self.min_length + 1
            starts = np.arange(lower.shape[0]) * group
            stops = np.minimum(starts + group, count)
            n_defined = np.isfinite(lower).sum(axis=1)
            rows = self.store_.extend(pos, starts, stops, n_defined, lower, upper,
                                      to_symbols(lower, self.breakpoints_),
                                      to_symbols(upper, self.breakpoints_))
            for e in rows:
                self.tree_.insert(e)
        self.tree_.finalize()
        self.build_time_ = time.perf_counter() - t0
        return self

    def _attach(self, series: list[DataSeries]):
        """Bind raw data: a flat buffer plus per-series bases (positional ids)."""
        self.series_ = series
        self.lengths_ = np.array([len(d) for d in series], dtype=np.int64)
        self.bases_ = np.concatenate(([0], np.cumsum(self.lengths_)[:-1])).astype(np.int64)
        self.buffer_ = np.concatenate([d.values for d in series])
        self._stats_cache = {}

    def insert(self, env: UEnvelope):
        """Add one envelope (built with this index's parameters) to the tree."""
        check_is_fitted(self, "tree_")
        w = self.store_.w
        if env.isax_lower.alphabet_size != self.alphabet_size or len(env.isax_lower.symbols) != w:
            raise ValueError("envelope parameters do not match the index")
        if not 0 <= env.series_id < len(self.series_):
            raise ValueError(f"unknown series position {env.series_id}")
        e = self.store_.append(env.series_id, env.start, env.stop, env.n_segments,
                               np.full(w, np.nan), np.full(w, np.nan),
                               np.asarray(env.isax_lower.symbols, dtype=np.int64),
                               np.asarray(env.isax_upper.symbols, dtype=np.int64))
        self.tree_.insert(e)
        self.tree_.finalize()
        return self

    # -- statistics --------------------------------------------------------

    def _flat_stats(self, m: int):
        cached = self._stats_cache.get(m)
        if cached is not None:
            return cached
        total = self.buffer_.shape[0]
        means = np.zeros(total)
        stds = np.zeros(total)
        if self.normalize:
            for pos, d in enumerate(self.series_):
                mu, sd = window_stats(d, m)
                b = self.bases_[pos]
                means[b:b + mu.shape[0]] = mu
                stds[b:b + sd.shape[0]] = sd
        if len(self._stats_cache) > 64:
            self._stats_cache.clear()
        self._stats_cache[m] = (means, stds)
        return means, stds

    # -- queries -----------------------------------------------------------

    def _check_query(self, Q):
        q = np.asarray(Q, dtype=np.float64).ravel()
        if not self.min_length <= q.shape[0] <= self.max_length:
            raise ValueError(
                f"query length {q.shape[0]} outside [{self.min_length}, {self.max_length}]")
        if not np.all(np.isfinite(q)):
            raise ValueError("query contains non-finite values")
        return q

    def query(self, Q, k: int = 1, exact: bool = True, metric: str | None = None) -> QueryResult:
        """k nearest subsequences of length ``len(Q)``.

        Ties are broken by collection position, then offset.
        """
        check_is_fitted(self, "tree_")
        q = self._check_query(Q)
        if k < 1:
            raise ValueError("k must be >= 1")
        metric = metric or self.metric
        return search(self, q, int(k), metric, metric_code(metric), exact)

    def kneighbors(self, Q, n_neighbors: int = 1, exact: bool = True, metric: str | None = None):
        """Return ``(distances, positions)`` where positions are ``(series, offset)`` rows."""
        res = self.query(Q, n_neighbors, exact=exact, metric=metric)
        pos = np.array([[r.series_id, r.offset] for r in res.refs], dtype=np.int64).reshape(-1, 2)
        return res.distances, pos

    # -- introspection -----------------------------------------------------

    @property
    def n_envelopes_(self) -> int:
        return len(self.store_)

    def stats(self) -> dict:
        check_is_fitted(self, "tree_")
        leaves = self.tree_.leaves()
        return {
            "envelopes": self.n_envelopes_,
            "expected_envelopes": int(sum(envelope_count(int(n), self.min_length, self.gamma_)
                                          for n in self.lengths_)),
            "nodes": self.tree_.node_count,
            "leaves": len(leaves),
            "max_leaf_size": max(len(n.entries) for n in leaves),
            "build_time": self.build_time_,
        }
