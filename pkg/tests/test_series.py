import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import norm

from varlen import build_series, znormalize
from varlen.series import (
    SubsequenceRef,
    gaussian_breakpoints,
    isax_from_paa,
    paa,
    subseq_stats,
    window_stats,
)
from conftest import random_walk

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_prefix_sums_small():
    d = build_series([1, 2, 3])
    np.testing.assert_array_equal(d.prefix_sum, [0, 1, 3, 6])
    np.testing.assert_array_equal(d.prefix_sum_sq, [0, 1, 5, 14])


def test_empty_series_rejected():
    with pytest.raises(ValueError, match="empty series"):
        build_series([])


def test_non_finite_names_position():
    with pytest.raises(ValueError, match="position 2"):
        build_series([0.0, 1.0, np.nan, 3.0])
    with pytest.raises(ValueError, match="position 0"):
        build_series([np.inf])


def test_values_are_read_only():
    d = build_series([1.0, 2.0])
    with pytest.raises(ValueError):
        d.values[0] = 5.0


def test_stats_two_points():
    assert subseq_stats(build_series([0, 2]), 0, 2) == (1.0, 1.0)


def test_constant_window_has_zero_std():
    d = build_series([0.1] * 7 + [3.0, 0.3])
    assert subseq_stats(d, 0, 7)[1] == 0.0
    assert subseq_stats(d, 2, 5)[1] == 0.0
    assert subseq_stats(d, 2, 6)[1] > 0


def test_stats_out_of_range():
    d = build_series(np.arange(10.0))
    for s, ell in [(-1, 3), (8, 3), (0, 0), (0, 11)]:
        with pytest.raises(IndexError):
            subseq_stats(d, s, ell)


def test_stats_long_walk_vs_direct():
    x = random_walk(1_000_000, seed=2)
    d = build_series(x)
    g = np.random.default_rng(3)
    for _ in range(1000):
        ell = int(g.integers(1, 5000))
        s = int(g.integers(0, len(x) - ell + 1))
        w = x[s:s + ell]
        mu, sd = d.stats(s, ell)
        assert mu == pytest.approx(w.mean(), rel=1e-9, abs=1e-9)
        assert sd == pytest.approx(w.std(), rel=1e-9, abs=1e-9)


@given(arrays(np.float64, st.integers(1, 200), elements=finite), st.data())
def test_stats_match_direct(x, data):
    d = build_series(x)
    ell = data.draw(st.integers(1, len(x)))
    s = data.draw(st.integers(0, len(x) - ell))
    w = x[s:s + ell]
    mu, sd = d.stats(s, ell)
    scale = max(1.0, np.abs(w).max())
    assert abs(mu - w.mean()) <= 1e-9 * scale
    assert abs(sd - w.std()) <= 1e-9 * scale + 1e-7 * scale * (sd < 1e-3)


@given(arrays(np.float64, st.integers(1, 100), elements=finite))
def test_prefix_differences_are_values(x):
    d = build_series(x)
    assert d.prefix_sum[0] == 0 and d.prefix_sum_sq[0] == 0
    scale = max(1.0, np.abs(x).sum())
    np.testing.assert_allclose(np.diff(d.prefix_sum), x, atol=1e-9 * scale)
    np.testing.assert_allclose(np.diff(d.prefix_sum_sq), x * x, atol=1e-9 * scale * scale)


def test_window_stats_agree_with_scalar_path(short_walk):
    mu, sd = window_stats(short_walk, 37)
    for s in (0, 100, len(short_walk) - 37):
        assert (mu[s], sd[s]) == short_walk.stats(s, 37)


def test_subsequence_ref_bounds():
    d = build_series(np.zeros(5))
    SubsequenceRef(d.id, 0, 5).check(d)
    with pytest.raises(IndexError):
        SubsequenceRef(d.id, 1, 5).check(d)


def test_znormalize_examples():
    np.testing.assert_array_equal(znormalize([0, 2]), [-1, 1])
    np.testing.assert_array_equal(znormalize([5, 5, 5]), [0, 0, 0])
    np.testing.assert_array_equal(znormalize([0.1, 0.1, 0.1]), [0, 0, 0])
    x = np.random.default_rng(0).standard_normal(64)
    z = znormalize(x)
    assert abs(z.mean()) < 1e-12
    assert abs(z.std() - 1) < 1e-9


def test_znormalize_rejects_bad_input():
    with pytest.raises(ValueError):
        znormalize([])
    with pytest.raises(ValueError):
        znormalize([1.0, np.nan])


non_constant = arrays(np.float64, st.integers(2, 64), elements=st.floats(-100, 100)).filter(
    lambda x: x.std() > 1e-3)


@given(non_constant)
def test_znormalize_idempotent(x):
    z = znormalize(x)
    np.testing.assert_allclose(znormalize(z), z, atol=1e-9)


@given(non_constant, st.floats(1e-3, 1e3), st.floats(-1e3, 1e3))
def test_znormalize_affine_invariant(x, a, b):
    np.testing.assert_allclose(znormalize(a * x + b), znormalize(x), atol=1e-9 * max(1, 1 / a))


def test_paa_examples():
    np.testing.assert_array_equal(paa([1, 2, 3, 4], 2).coefficients, [1.5, 3.5])
    np.testing.assert_array_equal(paa([1, 2, 3, 4, 5, 6, 7], 2).coefficients, [1.5, 3.5, 5.5])
    x = np.random.default_rng(1).standard_normal(17)
    np.testing.assert_array_equal(paa(x, 1).coefficients, x)
    with pytest.raises(ValueError, match="shorter than one segment"):
        paa([1, 2], 3)


@given(st.integers(1, 8), st.integers(1, 12), st.integers(1, 12), st.data())
def test_paa_prefix_property(s, k1, k2, data):
    lo, hi = sorted((k1, k2))
    x = np.array(data.draw(st.lists(finite, min_size=hi * s, max_size=hi * s + s - 1)))
    long = paa(x[:hi * s], s)
    short = paa(x[:lo * s], s)
    np.testing.assert_array_equal(long.prefix(lo).coefficients, short.coefficients)
    assert len(paa(x, s)) == len(x) // s


@given(arrays(np.float64, st.integers(4, 40), elements=finite), st.integers(1, 4))
def test_paa_segments_are_means(x, s):
    p = paa(x, s)
    expect = x[: len(p) * s].reshape(-1, s).mean(axis=1)
    np.testing.assert_allclose(p.coefficients, expect, rtol=1e-12, atol=1e-9)


def test_breakpoints_examples():
    np.testing.assert_array_equal(gaussian_breakpoints(2).thresholds, [0.0])
    np.testing.assert_allclose(gaussian_breakpoints(4).thresholds, [-0.6745, 0, 0.6745],
                               atol=1e-4)
    t = gaussian_breakpoints(8).thresholds
    assert t.size == 7 and np.all(np.diff(t) > 0)
    np.testing.assert_array_equal(t, -t[::-1])


@pytest.mark.parametrize("a", [2, 4, 8, 16, 64, 256, 1024])
def test_breakpoints_are_normal_quantiles(a):
    # independent quantile routine
    expect = norm.ppf(np.arange(1, a) / a)
    np.testing.assert_allclose(gaussian_breakpoints(a).thresholds, expect, atol=1e-12)


@pytest.mark.parametrize("a", [0, 1, 3, 6, 100])
def test_breakpoints_need_power_of_two(a):
    with pytest.raises(ValueError):
        gaussian_breakpoints(a)


def test_isax_examples():
    bp4 = gaussian_breakpoints(4)

    def sym(v, bp):
        return int(isax_from_paa(paa([v], 1), bp).symbols[0])

    assert sym(-0.7, bp4) == 0
    assert sym(0.1, bp4) == 2
    word = isax_from_paa(paa([-0.7, 0.1], 1), bp4)
    assert word.labels() == ["00", "10"]
    # a value on a threshold goes up
    assert sym(0.0, bp4) == 2
    assert sym(float(bp4.thresholds[0]), bp4) == 1
    bp2 = gaussian_breakpoints(2)
    for v in (-3.0, -1e-300, 0.0, 2.5):
        assert sym(v, bp2) == int(v >= 0)


@given(st.sampled_from([2, 4, 8, 32, 256]), st.data())
def test_region_lookup_inverts_bounds(a, data):
    bp = gaussian_breakpoints(a)
    s = data.draw(st.integers(0, a - 1))
    lo, hi = bp.region(s)
    lo = max(lo, -50.0)
    hi = min(hi, 50.0)
    v = data.draw(st.floats(lo, hi, exclude_min=True, exclude_max=True))
    assert int(bp.symbols([v])[0]) == s
    assert bp.symbols([v])[0] < a
