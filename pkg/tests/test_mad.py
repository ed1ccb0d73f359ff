import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from varlen import build_series, znormalize
from varlen.datagen import AnomalySpec, GenSpec, generate
from varlen.distance import euclidean
from varlen.mad import (
    LowerBoundState,
    MatrixProfileTransformer,
    PartialDistanceProfile,
    VariableLengthMiner,
    default_candidates,
    discover_range,
    distance_profile,
    exact_discords_at,
    exact_motif_at,
    lb_eval,
    lb_init,
    matrix_profile,
    partial_profile,
    validity_check,
)
from varlen.oracle import brute_discords, brute_motif, compare_discovery, neighbor_distances
from varlen.results import discovery_rows, rows_to_csv
from varlen.rules import exclusion_zone, select_non_overlapping

from conftest import random_walk


def true_distance(x, i, j, L):
    return euclidean(znormalize(x[i:i + L]), znormalize(x[j:j + L]))


# -- matrix profile -------------------------------------------------------

def test_sine_profile_is_flat_zero():
    x = np.sin(2 * np.pi * np.arange(2000) / 64)
    assert matrix_profile(build_series(x), 64).distances.max() < 1e-6


def test_alternating_series_profile():
    mp = matrix_profile(build_series([0, 1, 0, 1, 0, 1, 0, 1.0]), 4)
    # offset 2 is inside the zone of 0, offset 4 is the nearest admissible
    assert mp.distances[0] == 0.0 and mp.indices[0] == 4
    assert distance_profile(build_series([0, 1, 0, 1, 0, 1, 0, 1.0]), 0, 4).offsets.tolist() == [
        3, 4]


def test_profile_matches_quadratic_oracle():
    d = build_series(random_walk(10_000, seed=1))
    mp = matrix_profile(d, 64)
    nn, where = neighbor_distances(d, 64, 1)
    np.testing.assert_allclose(mp.distances, nn[:, 0], atol=1e-6)
    (a, b), dist = mp.motif()
    assert dist == pytest.approx(nn.min(), abs=1e-6)
    assert mp.distances[a] == pytest.approx(mp.distances[b], abs=1e-9)


def test_distance_profile_matches_direct(walk):
    x = walk.values
    for i in (0, 500, 1936):
        dp = distance_profile(walk, i, 64)
        assert np.all(np.abs(dp.offsets - i) > 32) and np.all(dp.distances >= 0)
        expect = [true_distance(x, i, j, 64) for j in dp.offsets]
        np.testing.assert_allclose(dp.distances, expect, atol=1e-6)
        dist, off = dp.nearest(3)
        assert dist[0] == dp.min and off[0] == dp.argmin


@given(st.floats(0.01, 100), st.floats(-1e3, 1e3))
def test_profile_affine_invariant(a, b):
    x = random_walk(400, seed=2)
    base = matrix_profile(build_series(x), 20).distances
    np.testing.assert_allclose(matrix_profile(build_series(a * x + b), 20).distances, base,
                               atol=1e-6)


def test_length_checks():
    d = build_series(random_walk(100))
    for L in (3, 51):
        with pytest.raises(ValueError):
            matrix_profile(d, L)


@given(st.integers(0, 300), st.integers(0, 300), st.integers(4, 60))
def test_exclusion_symmetric(i, j, L):
    d = build_series(random_walk(400, seed=3))
    if i + L > 400 or j + L > 400:
        return
    assert (lb_init(d, i, j, L) is None) == (lb_init(d, j, i, L) is None) == (
        abs(i - j) <= exclusion_zone(L))


# -- lower bounds ---------------------------------------------------------

def test_bound_at_base_is_true_distance(walk):
    x = walk.values
    for i, j in [(0, 100), (700, 20), (1500, 1900)]:
        e = lb_init(walk, i, j, 48)
        assert lb_eval(e, walk, 48) == pytest.approx(true_distance(x, i, j, 48), abs=1e-9)
        assert (e.mean_i, e.std_i) == walk.stats(i, 48)
        assert (e.mean_j, e.std_j) == walk.stats(j, 48)
    assert lb_init(walk, 10, 30, 48) is None


def test_identical_windows_bound_zero():
    x = np.tile(np.random.default_rng(4).standard_normal(50), 8)
    d = build_series(x)
    e = lb_init(d, 10, 110, 32)
    for t in range(32, 120, 7):
        assert lb_eval(e, d, t) <= 1e-6


def test_bound_target_validation(walk):
    e = lb_init(walk, 0, 100, 48)
    with pytest.raises(ValueError):
        lb_eval(e, walk, 40)
    with pytest.raises(ValueError):
        lb_eval(lb_init(walk, 0, 1900, 48), walk, 120)


@given(st.integers(0, 10_000), st.integers(8, 64), st.integers(0, 64))
def test_bound_never_exceeds_distance(seed, base, k):
    g = np.random.default_rng(seed)
    x = random_walk(600, seed=seed)
    d = build_series(x)
    t = base + k
    i, j = g.integers(0, 600 - t + 1, size=2)
    e = lb_init(d, int(i), int(j), base)
    if e is None:
        return
    assert lb_eval(e, d, t) <= true_distance(x, i, j, t) + 1e-9


def test_rank_preserved_across_lengths(walk):
    g = np.random.default_rng(5)
    state = LowerBoundState(walk, 64)
    for i in g.choice(1800, 10, replace=False):
        cands = [c for c in np.sort(g.choice(1800, 120, replace=False))
                 if abs(c - i) > 32][:100]
        for c in cands:
            state.add(int(i), int(c))
        orders = []
        for k in range(1, 33):
            state.set_target(64 + k)
            lbs = state.bounds(int(i), cands)
            orders.append(np.lexsort((cands, lbs)))
        for o in orders[1:]:
            np.testing.assert_array_equal(o, orders[0])


# -- partial profiles -----------------------------------------------------

def test_exhaustive_partial_profile_is_valid(short_walk):
    state = LowerBoundState(short_walk, 32)
    pp = partial_profile(short_walk, 100, 40, state, p=10_000)
    assert pp.max_lb == np.inf and validity_check(pp) and validity_check(pp, 3)
    assert pp.kth(1) == pytest.approx(distance_profile(short_walk, 100, 40).min, abs=1e-6)


def test_partial_distances_are_exact(short_walk):
    state = LowerBoundState(short_walk, 32)
    x = short_walk.values
    for i in (0, 250, 520):
        pp = partial_profile(short_walk, i, 50, state, p=12)
        assert pp.offsets.size <= 12
        for j, dist in zip(pp.offsets, pp.distances):
            assert dist == pytest.approx(true_distance(x, i, j, 50), abs=1e-6)
    with pytest.raises(ValueError):
        partial_profile(short_walk, 0, 50, state, p=2, m=3)


def test_planted_pair_profile():
    gen = generate(GenSpec("planted", 1500, seed=6, pattern_length=80))
    a, b = gen.motif_offsets
    d = gen.series
    state = LowerBoundState(d, 64)
    pp = partial_profile(d, a, 80, state, p=20)
    assert validity_check(pp)
    assert pp.kth(1) < 1e-6 and pp.nearest(1)[1][0] == b


def test_validity_examples():
    pp = PartialDistanceProfile(0, 8, np.array([5, 9]), np.array([0.0, 3.0]), 0.5)
    assert validity_check(pp, 1)
    assert not validity_check(pp, 2)
    far = PartialDistanceProfile(0, 8, np.array([5, 9]), np.array([1.0, 3.0]), 0.5)
    assert not validity_check(far, 1)


def test_valid_flags_are_sound():
    d = build_series(random_walk(400, seed=7))
    state = LowerBoundState(d, 16)
    g = np.random.default_rng(8)
    truth = {}
    confirmed = 0
    for _ in range(1000):
        L = int(g.integers(17, 41))
        i = int(g.integers(0, 400 - L + 1))
        m = int(g.integers(1, 4))
        pp = partial_profile(d, i, L, state, p=8, m=m)
        if not validity_check(pp, m):
            continue
        if L not in truth:
            truth[L] = neighbor_distances(d, L, 3)[0]
        assert pp.kth(m) == pytest.approx(truth[L][i, m - 1], abs=1e-6)
        confirmed += 1
    assert confirmed > 100


# -- per-length extraction ------------------------------------------------

def _profiles(d, L, base, p):
    state = LowerBoundState(d, base)
    return [partial_profile(d, i, L, state, p) for i in range(len(d) - L + 1)]


def test_motif_from_profiles_matches_brute():
    d = build_series(random_walk(500, seed=9))
    for L, p in [(24, 6), (30, 1000)]:
        entry, counters = exact_motif_at(d, L, _profiles(d, L, 20, p))
        (a, b), dist = brute_motif(d, L).result
        assert entry.offsets == (a, b)
        assert entry.distance == pytest.approx(dist, abs=1e-6)
        if p == 1000:
            assert counters["profiles_recomputed"] == 0


def test_planted_zero_distance_motif():
    gen = generate(GenSpec("planted", 600, seed=10, pattern_length=40))
    entry, _ = exact_motif_at(gen.series, 36, _profiles(gen.series, 36, 32, 4))
    # the 40-point copies hold five aligned zero-distance windows of length 36
    shift = entry.offsets[0] - gen.motif_offsets[0]
    assert 0 <= shift <= 4 and entry.offsets[1] - gen.motif_offsets[1] == shift
    assert entry.distance < 1e-6


def test_discords_from_profiles_match_brute():
    gen = generate(GenSpec("planted", 600, seed=11, pattern_length=30,
                           anomaly=AnomalySpec(length=4, amplitude=40)))
    d = gen.series
    for L, p in [(24, 5), (28, 1000)]:
        got, counters = exact_discords_at(d, L, _profiles(d, L, 20, p), 3, 3)
        exp = brute_discords(d, L, 3, 3).result
        for m in (1, 2, 3):
            assert [o for o, _ in got[m]] == [o for o, _ in exp[m]]
            np.testing.assert_allclose([v for _, v in got[m]], [v for _, v in exp[m]], atol=1e-6)
        if p == 1000:
            assert counters["profiles_recomputed"] == 0
    with pytest.raises(ValueError):
        exact_discords_at(d, 24, _profiles(d, 24, 20, 5), 0, 1)


def test_full_ranking_matches_sorted_profile():
    d = build_series(random_walk(300, seed=12))
    L = 20
    n = 300 - L + 1
    got, _ = exact_discords_at(d, L, _profiles(d, L, 16, 6), n, 1)
    mp = matrix_profile(d, L).distances
    picked = select_non_overlapping(mp, np.arange(n), n, L)
    assert [o for o, _ in got[1]] == picked
    np.testing.assert_allclose([v for _, v in got[1]], mp[picked], atol=1e-6)


# -- whole range ----------------------------------------------------------

def test_degenerate_range_is_fixed_length(walk):
    res = discover_range(walk, 50, 50)
    (a, b), dist = brute_motif(walk, 50).result
    assert res.motifs[50].offsets == (a, b)
    assert res.motifs[50].distance == pytest.approx(dist, abs=1e-6)
    grid = brute_discords(walk, 50, 3, 3).result
    for m in (1, 2, 3):
        assert [o for o, _ in res.discords[(50, m)]] == [o for o, _ in grid[m]]
    assert res.counters["profiles_recomputed"] == 0


@pytest.mark.parametrize("p", [None, 3, 40])
def test_range_matches_brute_force(walk, p):
    res = discover_range(walk, 40, 56, a=3, b=3, p=p)
    diffs, _ = compare_discovery(res, walk, range(40, 57), 3, 3)
    assert diffs == []
    c = res.counters
    assert c["full_profiles"] == c["base_profiles"] + c["profiles_recomputed"]
    assert c["full_profiles"] < c["naive_profiles"]
    assert sum(c["recomputed_per_length"].values()) == c["profiles_recomputed"]


def test_constant_windows_can_be_excluded():
    x = random_walk(800, seed=13)
    x[300:400] = x[300]
    d = build_series(x)
    res = discover_range(d, 24, 30, a=2, b=1, exclude_constant=True)
    diffs, _ = compare_discovery(res, d, range(24, 31), 2, 1, exclude_constant=True)
    assert diffs == []
    for L in range(24, 31):
        for off, _ in res.discords[(L, 1)]:
            assert d.stats(off, L)[1] > 0


def test_range_validation(walk):
    with pytest.raises(ValueError):
        discover_range(walk, 60, 50)
    with pytest.raises(ValueError):
        discover_range(walk, 40, 50, a=0)
    with pytest.raises(ValueError):
        discover_range(walk, 40, 50, b=3, p=2)
    with pytest.raises(ValueError):
        discover_range(walk, 40, 1001)
    assert default_candidates(1000) == 50 and default_candidates(100) == 16
    assert default_candidates(100, 20) == 20


def test_result_rows(walk):
    res = discover_range(walk, 40, 42, a=2, b=2)
    rows = discovery_rows(res.motifs, res.discords)
    assert len(rows) == 3 * (1 + 2 * 2)
    motif = rows[0]
    assert motif["kind"] == "motif" and motif["offset_a"] < motif["offset_b"]
    assert motif["normalized_distance"] == pytest.approx(motif["distance"] / np.sqrt(40))
    csv = rows_to_csv(rows).splitlines()
    assert csv[0] == "length,kind,rank,m,offset_a,offset_b,distance,normalized_distance"
    assert len(csv) == len(rows) + 1
    best = res.motifs.best()
    assert best.normalized_distance == min(e.normalized_distance for e in res.motifs)


# -- estimators -----------------------------------------------------------

def test_miner_estimator(walk):
    miner = VariableLengthMiner(min_length=40, max_length=44, n_discords=2, max_neighbor=2)
    assert clone(miner).get_params() == miner.get_params()
    with pytest.raises(Exception):
        miner.results()
    miner.fit(walk.values.reshape(-1, 1))
    ref = discover_range(walk, 40, 44, 2, 2)
    assert miner.best_motif() == ref.motifs.best()
    assert miner.results() == discovery_rows(ref.motifs, ref.discords)
    assert miner.n_candidates_ == default_candidates(len(walk) - 40 + 1, 2)
    with pytest.raises(ValueError):
        VariableLengthMiner().fit(np.zeros((3, 3)))


def test_profile_transformer():
    X = np.stack([random_walk(200, seed=s) for s in range(3)])
    out = MatrixProfileTransformer(window=16).fit_transform(X)
    assert out.shape == (3, 185)
    np.testing.assert_allclose(out[1], matrix_profile(build_series(X[1]), 16).distances)
    with pytest.raises(ValueError):
        MatrixProfileTransformer(16).fit(X).transform(X[:, :100])
